//! Dense row-major kernels for the small symmetric systems the GP needs.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// In-place lower Cholesky of a row-major symmetric matrix. Only the lower
/// triangle is read; the strict upper triangle is zeroed on success.
///
/// On failure returns the offending pivot index and its (non-positive) value.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), (usize, f64)> {
    debug_assert_eq!(a.len(), n * n);
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = a.split_at_mut(i * n);
            let row_i = &tail[..n];
            let s = if j < i {
                let row_j = &head[j * n..j * n + j];
                row_i[j] - dot(&row_i[..j], row_j)
            } else {
                row_i[i] - dot(&row_i[..i], &row_i[..i])
            };
            if j == i {
                if !(s > 0.0) || !s.is_finite() {
                    return Err((i, s));
                }
                tail[i] = s.sqrt();
            } else {
                let ljj = head[j * n + j];
                tail[j] = s / ljj;
            }
        }
        for v in &mut a[i * n + i + 1..(i + 1) * n] {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Solve `L y = b` for lower-triangular `L`.
pub fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        y[i] = (b[i] - dot(row, &y[..i])) / l[i * n + i];
    }
    y
}

/// Solve `Lᵀ x = y` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[i * n + i];
        let xi = x[i];
        for k in 0..i {
            x[k] -= l[i * n + k] * xi;
        }
    }
    x
}

/// Solve `(L Lᵀ) x = b`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let y = solve_lower(l, n, b);
    solve_lower_transpose(l, n, &y)
}

/// `log det (L Lᵀ)`.
pub fn cholesky_log_det(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// Full symmetric inverse `(L Lᵀ)⁻¹`, row-major.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    // M = L⁻¹, built row by row from earlier rows.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let (done, rest) = m.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        row_i[i] = 1.0;
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                axpy(-lik, &done[k * n..k * n + k + 1], &mut row_i[..k + 1]);
            }
        }
        let inv = 1.0 / l[i * n + i];
        for v in &mut row_i[..=i] {
            *v *= inv;
        }
    }
    // A⁻¹ = Mᵀ M, accumulated over rows of M into the lower triangle.
    let mut inv = vec![0.0; n * n];
    for k in 0..n {
        let row_k = &m[k * n..k * n + k + 1];
        for i in 0..=k {
            let mki = row_k[i];
            if mki != 0.0 {
                axpy(mki, &row_k[..=i], &mut inv[i * n..i * n + i + 1]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            inv[j * n + i] = inv[i * n + j];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = i as f64 - j as f64;
                a[i * n + j] = (-0.1 * d * d).exp();
            }
            a[i * n + i] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let n = 13;
        let a = spd(n);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                assert!((v - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_and_solve_agree() {
        let n = 11;
        let a = spd(n);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        let inv = cholesky_inverse(&l, n);
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12, "{i} {j} {v}");
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = cholesky_solve(&l, n, &b);
        for i in 0..n {
            let v: f64 = (0..n).map(|k| a[i * n + k] * x[k]).sum();
            assert!((v - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_pivot_is_reported() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert_eq!(cholesky_in_place(&mut a, 2).unwrap_err().0, 1);
    }
}
