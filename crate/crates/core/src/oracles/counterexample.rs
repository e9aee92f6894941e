//! The rank-one family `T_n u = ⟨e_n, u⟩ e_1`: strongly convergent to zero
//! while every operator norm equals one.

/// `(‖T_n u‖, ‖T_n‖)` for a finitely supported coefficient vector.
///
/// `u[i]` is the coefficient of `e_{i+1}`; `n` is 1-based. The operator norm
/// comes from one power step on `T_n* T_n` in `span(e_1, ..., e_n)`.
pub fn shift_counterexample_norms(n: usize, u: &[f64]) -> (f64, f64) {
    assert!(n >= 1, "the orthonormal system is indexed from 1");
    let image_norm = norm(&apply(n, u));
    (image_norm, operator_norm(n))
}

/// `T_n u` as a coefficient vector (only `e_1` can be nonzero).
fn apply(n: usize, u: &[f64]) -> Vec<f64> {
    vec![u.get(n - 1).copied().unwrap_or(0.0)]
}

/// `T_n* v = v_1 e_n`.
fn apply_adjoint(n: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[n - 1] = v.first().copied().unwrap_or(0.0);
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn operator_norm(n: usize) -> f64 {
    // T_n* T_n is the projection onto e_n, so one step from a vector with a
    // nonzero e_n component lands on its top eigenvector.
    let start = vec![1.0; n];
    let z = apply_adjoint(n, &apply(n, &start));
    let nz = norm(&z);
    let unit: Vec<f64> = z.iter().map(|v| v / nz).collect();
    norm(&apply(n, &unit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(shift_counterexample_norms(5, &[1.0, 2.0]), (0.0, 1.0));
        assert_eq!(shift_counterexample_norms(1, &[1.0]), (1.0, 1.0));
        for n in [1, 2, 7, 100] {
            let mut u = vec![0.0; n];
            u[n - 1] = 1.0;
            assert_eq!(shift_counterexample_norms(n, &u), (1.0, 1.0));
        }
    }

    #[test]
    fn strong_but_not_norm_convergence() {
        let u = [0.3, -1.2, 0.5, 2.0];
        let tail: Vec<(f64, f64)> = (5..50).map(|n| shift_counterexample_norms(n, &u)).collect();
        assert!(tail.iter().all(|&(image, op)| image == 0.0 && op == 1.0));
    }
}
