use crate::error::{Error, Result};

/// Solves `A x = b` for a dense row-major `n × n` matrix by Gaussian
/// elimination with partial pivoting.
///
/// Rows whose multiplier is exactly zero are skipped, which keeps the cost
/// near `O(n²)` for the sparse, diagonally dominant systems `I − γPᵖ` that
/// policy evaluation produces.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    Error::check_len("matrix", n * n, a.len())?;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_abs = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = i;
            }
        }
        if !(pivot_abs > scale * 1e-14) {
            return Err(Error::Solver {
                context: "dense elimination",
                detail: format!("pivot {pivot_abs:e} at column {k} of {n} is numerically zero"),
            });
        }
        if pivot_row != k {
            for j in k..n {
                a.swap(k * n + j, pivot_row * n + j);
            }
            b.swap(k, pivot_row);
        }

        let (head, tail) = a.split_at_mut((k + 1) * n);
        let pivot = &head[k * n..];
        let inv = 1.0 / pivot[k];
        for (offset, row) in tail.chunks_exact_mut(n).enumerate() {
            let factor = row[k] * inv;
            if factor == 0.0 {
                continue;
            }
            row[k] = 0.0;
            for j in k + 1..n {
                row[j] -= factor * pivot[j];
            }
            b[k + 1 + offset] -= factor * b[k];
        }
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let row = &a[k * n..(k + 1) * n];
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= row[j] * x[j];
        }
        x[k] = acc / row[k];
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Solver {
            context: "dense elimination",
            detail: format!("solution component {i} is not finite"),
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_requiring_pivoting() {
        // [0 1; 2 1] x = [1; 4] -> x = [1.5, 1]
        let x = solve_dense(vec![0.0, 1.0, 2.0, 1.0], vec![1.0, 4.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-15);
        assert!((x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reports_singular_matrix() {
        let err = solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Solver { .. }));
    }

    #[test]
    fn residual_is_small_on_dominant_system() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 4.0;
            a[i * n + (i + 1) % n] = -1.0;
            a[i * n + (i + 3) % n] = 0.5;
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let x = solve_dense(a.clone(), b.clone()).unwrap();
        for i in 0..n {
            let lhs: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((lhs - b[i]).abs() < 1e-12);
        }
    }
}
