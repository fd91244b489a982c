use ldfa_core::linalg::{svd, Matrix, Rng};
use proptest::prelude::*;

fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn ortho_err(q: &Matrix) -> f64 {
    q.t_matmul(q).sub(&Matrix::identity(q.cols())).max_abs()
}

#[test]
fn gaussian_5x4_matches_reference_library() {
    let m = Rng::new(2024).gaussian_matrix(5, 4, 1.0);
    let ours = svd(&m).unwrap();
    let reference = to_na(&m).svd(true, true);

    let rel = ours.reconstruct().sub(&m).frobenius_norm() / m.frobenius_norm();
    assert!(rel <= 1e-8, "reconstruction {rel}");

    let mut theirs: Vec<f64> = reference.singular_values.iter().copied().collect();
    theirs.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in ours.s.iter().zip(&theirs) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    // Singular vectors agree up to sign, column by column.
    let ru = reference.u.unwrap();
    for j in 0..4 {
        let k = reference
            .singular_values
            .iter()
            .position(|&s| (s - ours.s[j]).abs() < 1e-12)
            .unwrap();
        let dotp: f64 = (0..5).map(|i| ours.u.get(i, j) * ru[(i, k)]).sum();
        assert!((dotp.abs() - 1.0).abs() < 1e-10, "column {j}: |<u,u_ref>| = {dotp}");
    }
}

#[test]
fn sign_convention_makes_largest_entry_nonnegative() {
    let m = Rng::new(5).gaussian_matrix(6, 4, 1.0);
    let t = svd(&m).unwrap();
    for j in 0..4 {
        let col = t.u.col(j);
        let big = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        assert!(big >= 0.0);
    }
}

#[test]
fn constructed_rank_is_detected() {
    let mut rng = Rng::new(77);
    for d in [0usize, 1, 3, 5] {
        let u = rng.gaussian_matrix(9, d, 1.0);
        let v = rng.gaussian_matrix(7, d, 1.0);
        let m = u.matmul_t(&v);
        let t = svd(&m).unwrap();
        assert_eq!(t.rank(1e-8), d, "rank {d}");
    }
}

fn shape_class() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    // (rows, cols, rank cap, seed); rank cap 0 means full rank.
    (1usize..12, 1usize..12, 0usize..4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_round_trips((rows, cols, cap, seed) in shape_class()) {
        let mut rng = Rng::new(seed);
        let m = if cap == 0 {
            rng.gaussian_matrix(rows, cols, 1.0)
        } else {
            rng.gaussian_matrix(rows, cap, 1.0).matmul(&rng.gaussian_matrix(cap, cols, 1.0))
        };
        let t = svd(&m).unwrap();
        let q = rows.min(cols);
        prop_assert_eq!(t.u.shape(), (rows, q));
        prop_assert_eq!(t.v.shape(), (cols, q));
        prop_assert!(ortho_err(&t.u) < 1e-10);
        prop_assert!(ortho_err(&t.v) < 1e-10);
        prop_assert!(t.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(t.s.iter().all(|&s| s >= 0.0));
        let err = t.reconstruct().sub(&m).frobenius_norm();
        prop_assert!(err <= 1e-8 * m.frobenius_norm().max(f64::MIN_POSITIVE));
    }
}
