use gapspec_core::{eigenvalues_symmetric, symmetric_eigen, DMatrix};
use proptest::prelude::*;

/// Number of eigenvalues of the symmetric tridiagonal (d, e) below `x`, by Sturm sequence.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal(d: &[f64], e: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            d[i]
        } else if i + 1 == j {
            e[i]
        } else if j + 1 == i {
            e[j]
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tridiagonal_spectrum_matches_sturm_counts(
        d in prop::collection::vec(-5.0f64..5.0, 2..24),
        seed in prop::collection::vec(-2.0f64..2.0, 23),
    ) {
        let e = &seed[..d.len() - 1];
        let eigs = eigenvalues_symmetric(&tridiagonal(&d, e), 1e-12).unwrap();
        for (k, &v) in eigs.iter().enumerate() {
            let gap = 1e-9 * (1.0 + v.abs());
            prop_assert!(sturm_count(&d, e, v - gap) <= k);
            prop_assert!(sturm_count(&d, e, v + gap) > k);
        }
    }

    #[test]
    fn dense_spectrum_matches_nalgebra(entries in prop::collection::vec(-3.0f64..3.0, 1..=144)) {
        let n = (entries.len() as f64).sqrt() as usize;
        let a = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
        let m = (&a + a.transpose()) * 0.5;
        let ours = symmetric_eigen(&m, 1e-12).unwrap();
        let mut theirs: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        let scale = 1.0 + ours.spectral_norm();
        for (x, y) in ours.eigenvalues.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-11 * scale);
        }
        prop_assert!(ours.max_residual(&m) <= 1e-12 * scale);
        let v = &ours.eigenvectors;
        let gram = v.transpose() * v;
        prop_assert!((gram - DMatrix::identity(n, n)).abs().max() <= 1e-12 * n as f64);
    }
}

#[test]
fn repeated_solves_are_bit_identical() {
    let m = DMatrix::from_fn(40, 40, |i, j| ((i * 31 + j * 17) % 13) as f64 + ((i + j) % 5) as f64);
    let m = (&m + m.transpose()) * 0.5;
    let a = symmetric_eigen(&m, 1e-12).unwrap();
    let b = symmetric_eigen(&m, 1e-12).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.eigenvectors, b.eigenvectors);
}
