use ldfa_core::feedback::{FeedbackHyper, FeedbackPathway, LocalOutcome, LocalRule, PathwayKind};
use ldfa_core::linalg::{macs, svd, Matrix, Rng};
use ldfa_core::metrics::{backward_flops, subspace_alignment};
use proptest::prelude::*;

fn hyper(eta_fb: f64) -> FeedbackHyper {
    FeedbackHyper {
        eta_fb,
        lambda: 0.0,
        update_interval: 1,
    }
}

fn ones(rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| 1.0)
}

/// Symmetric matrix with the given eigenvalues and a random eigenbasis;
/// returns the matrix and its eigenvectors (columns, in the given order).
fn spd_with_spectrum(eigs: &[f64], seed: u64) -> (Matrix, Matrix) {
    let n = eigs.len();
    let basis = svd(&Rng::new(seed).gaussian_matrix(n, n, 1.0)).unwrap().u;
    let scaled = Matrix::from_fn(n, n, |i, j| basis.get(i, j) * eigs[j]);
    (scaled.matmul_t(&basis), basis)
}

/// A driving batch `D` whose uncentered second moment `D Dᵀ / batch` is `c`.
fn batch_with_second_moment(c: &Matrix) -> Matrix {
    // c = L Lᵀ with L = E diag(sqrt λ); columns of L scaled by sqrt(batch).
    let t = svd(c).unwrap();
    let n = c.rows();
    let l = Matrix::from_fn(n, n, |i, j| t.u.get(i, j) * t.s[j].sqrt());
    l.scale((n as f64).sqrt())
}

#[test]
fn transpose_error_matches_finite_difference_of_layer_loss() {
    // L(h) = ½‖y − W h‖², so −∂L/∂h = Wᵀ (y − W h).
    let mut rng = Rng::new(1);
    let w = rng.gaussian_matrix(4, 6, 1.0);
    let h = rng.gaussian_matrix(6, 1, 1.0);
    let y = rng.gaussian_matrix(4, 1, 1.0);
    let delta_src = y.sub(&w.matmul(&h));
    let pw = FeedbackPathway::transpose(2);
    let got = pw.propagate_error(&delta_src, &ones(6, 1), Some(&w)).unwrap();

    let loss = |h: &Matrix| 0.5 * y.sub(&w.matmul(h)).frobenius_norm().powi(2);
    let eps = 1e-6;
    for i in 0..6 {
        let mut hp = h.clone();
        let mut hm = h.clone();
        hp.set(i, 0, h.get(i, 0) + eps);
        hm.set(i, 0, h.get(i, 0) - eps);
        let neg_grad = -(loss(&hp) - loss(&hm)) / (2.0 * eps);
        let rel = (neg_grad - got.get(i, 0)).abs() / got.get(i, 0).abs().max(1e-12);
        assert!(rel < 1e-6, "component {i}: fd {neg_grad} vs {}", got.get(i, 0));
    }
}

#[test]
fn full_rank_factorization_reproduces_transpose() {
    let mut rng = Rng::new(2);
    let w = rng.gaussian_matrix(5, 7, 1.0);
    // Wᵀ = (V S)(Uᵀ): exact rank-5 factors.
    let t = svd(&w).unwrap();
    let q = Matrix::from_fn(7, 5, |i, j| t.v.get(i, j) * t.s[j]);
    let p = t.u.t();
    let factored = FeedbackPathway::from_factors(PathwayKind::FactoredNormative, q, p, 2, LocalRule::default()).unwrap();
    let delta = rng.gaussian_matrix(5, 3, 1.0);
    let deriv = rng.gaussian_matrix(7, 3, 1.0);
    let a = factored.propagate_error(&delta, &deriv, None).unwrap();
    let b = FeedbackPathway::transpose(2).propagate_error(&delta, &deriv, Some(&w)).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

#[test]
fn factored_propagation_cost_is_exact() {
    let mut rng = Rng::new(3);
    for (n_layer, n_src, r, batch) in [(12, 7, 3, 5), (64, 10, 8, 32), (5, 5, 5, 1)] {
        let pw = FeedbackPathway::local(n_layer, n_src, r, 2, LocalRule::default(), &mut rng).unwrap();
        let delta = rng.gaussian_matrix(n_src, batch, 1.0);
        let deriv = ones(n_layer, batch);
        let (_, spent) = macs::measure(|| pw.propagate_error(&delta, &deriv, None).unwrap());
        assert_eq!(spent, (r * (n_src + n_layer) * batch) as u64);
        assert_eq!(spent, backward_flops(n_layer, n_src, PathwayKind::FactoredLocal, r) * batch as u64);
    }
}

#[test]
fn normative_fixed_point_is_still() {
    let mut rng = Rng::new(4);
    let q = rng.gaussian_matrix(6, 2, 1.0);
    let p = rng.gaussian_matrix(2, 4, 1.0);
    let w = q.matmul(&p).t();
    let mut pw = FeedbackPathway::from_factors(PathwayKind::FactoredNormative, q, p, 2, LocalRule::default()).unwrap();
    let before = pw.clone();
    pw.update_normative(&w, &hyper(0.1)).unwrap();
    assert_eq!(pw, before);
}

/// Gradient descent on ½‖QP − Wᵀ‖² until the loss stops moving.
fn converge_normative(w: &Matrix, r: usize, seed: u64) -> f64 {
    let (n_src, n_layer) = w.shape();
    let mut pw = FeedbackPathway::normative(n_layer, n_src, r, 2, &mut Rng::new(seed)).unwrap();
    let s1 = svd(w).unwrap().s[0];
    let h = hyper(0.2 / (s1 * s1));
    let residual = |pw: &FeedbackPathway| pw.effective_matrix(None).unwrap().sub(&w.t()).frobenius_norm().powi(2);
    let mut last = residual(&pw);
    for it in 0..2_000_000 {
        pw.update_normative(w, &h).unwrap();
        if it % 1000 == 999 {
            let now = residual(&pw);
            if (last - now).abs() < 1e-15 * last.max(1.0) {
                return now;
            }
            last = now;
        }
    }
    residual(&pw)
}

#[test]
fn normative_full_rank_reaches_exact_transpose() {
    let w = Rng::new(5).gaussian_matrix(4, 6, 1.0);
    let r = 4;
    let err = converge_normative(&w, r, 6);
    assert!(err.sqrt() < 1e-6, "‖QP − Wᵀ‖ = {}", err.sqrt());
}

#[test]
fn normative_low_rank_reaches_eckart_young_optimum() {
    let w = Rng::new(7).gaussian_matrix(5, 6, 1.0);
    let s = svd(&w).unwrap().s;
    for r in 1..5 {
        let tail: f64 = s[r..].iter().map(|v| v * v).sum();
        let got = converge_normative(&w, r, 100 + r as u64);
        assert!((got - tail).abs() < 1e-6, "r = {r}: {got} vs optimum {tail}");
    }
}

#[test]
fn oja_fixed_point_when_covariance_lies_in_row_space() {
    // P row-orthonormal; C = Pᵀ Δ P.
    let basis = svd(&Rng::new(8).gaussian_matrix(5, 5, 1.0)).unwrap().u;
    let p = basis.column_range(0, 2).t();
    let delta = Matrix::diag(&[3.0, 1.5]);
    let c = p.t_matmul(&delta).matmul(&p);
    let drive = batch_with_second_moment(&c);
    let rule = LocalRule {
        raw_oja: true,
        ..LocalRule::default()
    };
    let q = Rng::new(9).gaussian_matrix(4, 2, 1.0);
    let mut pw = FeedbackPathway::from_factors(PathwayKind::FactoredLocal, q, p.clone(), 2, rule).unwrap();
    pw.update_local(&drive, &Matrix::zeros(4, 5), None, &hyper(0.1)).unwrap();
    let (_, p_after) = pw.factors().unwrap();
    assert!(p_after.max_abs_diff(&p) < 1e-12);
}

fn run_oja(c: &Matrix, r: usize, rule: LocalRule, steps: usize, eta: f64, seed: u64) -> FeedbackPathway {
    let n = c.rows();
    let mut pw = FeedbackPathway::local(4, n, r, 2, rule, &mut Rng::new(seed)).unwrap();
    let drive = batch_with_second_moment(c);
    for _ in 0..steps {
        let out = pw.update_local(&drive, &Matrix::zeros(4, n), None, &hyper(eta)).unwrap();
        assert_eq!(out, LocalOutcome::Applied);
    }
    pw
}

#[test]
fn oja_converges_to_top_eigenspace() {
    let (c, eig) = spd_with_spectrum(&[4.0, 2.5, 1.0, 0.5, 0.2, 0.1], 10);
    let rule = LocalRule {
        raw_oja: true,
        ..LocalRule::default()
    };
    let pw = run_oja(&c, 2, rule, 20_000, 0.05, 11);
    let (_, p) = pw.factors().unwrap();
    let angles = subspace_alignment(p, &eig.column_range(0, 2)).unwrap();
    assert!(angles.max_angle() < 1e-3, "angles {:?}", angles.principal_angles);
    assert!(pw.orthonormality_error().unwrap() < 1e-4);
}

#[test]
fn normalized_oja_is_scale_invariant() {
    let mut rng = Rng::new(12);
    let d = rng.gaussian_matrix(6, 20, 1.0);
    let h = rng.gaussian_matrix(5, 20, 1.0);
    let base = FeedbackPathway::local(5, 6, 3, 2, LocalRule::default(), &mut rng).unwrap();
    let mut a = base.clone();
    let mut b = base.clone();
    a.update_local(&d, &h, None, &hyper(0.05)).unwrap();
    b.update_local(&d.scale(10.0), &h, None, &hyper(0.05)).unwrap();
    let (_, pa) = a.factors().unwrap();
    let (_, pb) = b.factors().unwrap();
    assert!(pa.max_abs_diff(pb) < 1e-12);
}

#[test]
fn local_rule_leaves_q_alone_unless_asked() {
    let mut rng = Rng::new(13);
    let d = rng.gaussian_matrix(6, 10, 1.0);
    let h = rng.gaussian_matrix(5, 10, 1.0);
    let mut pw = FeedbackPathway::local(5, 6, 2, 2, LocalRule::default(), &mut rng).unwrap();
    let q0 = pw.factors().unwrap().0.clone();
    pw.update_local(&d, &h, None, &hyper(0.1)).unwrap();
    assert_eq!(pw.factors().unwrap().0, &q0);

    let rule = LocalRule {
        update_q: true,
        ..LocalRule::default()
    };
    let mut pw = FeedbackPathway::local(5, 6, 2, 2, rule, &mut rng).unwrap();
    let (q0, p0) = (pw.factors().unwrap().0.clone(), pw.factors().unwrap().1.clone());
    pw.update_local(&d, &h, None, &hyper(0.1)).unwrap();
    let expected = q0.add(&h.matmul_t(&p0.matmul(&d)).scale(0.1 / 10.0));
    assert!(pw.factors().unwrap().0.max_abs_diff(&expected) < 1e-14);
}

#[test]
fn target_driven_rule_needs_targets() {
    let rule = LocalRule {
        use_targets: true,
        ..LocalRule::default()
    };
    let mut rng = Rng::new(14);
    let mut pw = FeedbackPathway::local(5, 3, 2, 2, rule, &mut rng).unwrap();
    let d = rng.gaussian_matrix(3, 4, 1.0);
    assert!(pw.update_local(&d, &Matrix::zeros(5, 4), None, &hyper(0.1)).is_err());
    assert!(pw.update_local(&d, &Matrix::zeros(5, 4), Some(&d), &hyper(0.1)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factored_rank_never_exceeds_r(seed in any::<u64>(), r in 1usize..4, steps in 1usize..20, local in any::<bool>()) {
        let mut rng = Rng::new(seed);
        let (n_layer, n_src) = (7, 5);
        let w = rng.gaussian_matrix(n_src, n_layer, 1.0);
        let mut pw = if local {
            FeedbackPathway::local(n_layer, n_src, r, 2, LocalRule { update_q: true, ..LocalRule::default() }, &mut rng).unwrap()
        } else {
            FeedbackPathway::normative(n_layer, n_src, r, 2, &mut rng).unwrap()
        };
        for _ in 0..steps {
            if local {
                let d = rng.gaussian_matrix(n_src, 6, 1.0);
                let h = rng.gaussian_matrix(n_layer, 6, 1.0);
                pw.update_local(&d, &h, None, &hyper(0.05)).unwrap();
            } else {
                pw.update_normative(&w, &hyper(0.01)).unwrap();
            }
        }
        let b = pw.effective_matrix(None).unwrap();
        prop_assert!(svd(&b).unwrap().rank(1e-8) <= r);
    }

    #[test]
    fn normative_step_never_increases_loss(seed in any::<u64>(), r in 1usize..5) {
        let mut rng = Rng::new(seed);
        let w = rng.gaussian_matrix(5, 6, 1.0);
        let mut pw = FeedbackPathway::normative(6, 5, r, 2, &mut rng).unwrap();
        let loss = |pw: &FeedbackPathway| pw.effective_matrix(None).unwrap().sub(&w.t()).frobenius_norm();
        for _ in 0..50 {
            let (q, p) = pw.factors().unwrap();
            // Step below 1 / largest eigenvalue of the factor Gram matrices
            // and of the target scale.
            let gram = svd(&q.t_matmul(q)).unwrap().s[0]
                .max(svd(&p.matmul_t(p)).unwrap().s[0])
                .max(svd(&w).unwrap().s[0].powi(2));
            let before = loss(&pw);
            pw.update_normative(&w, &hyper(0.25 / gram)).unwrap();
            prop_assert!(loss(&pw) <= before + 1e-12);
        }
    }

    #[test]
    fn oja_orthonormalizes_under_fixed_covariance(seed in 0u64..1000) {
        let (c, _) = spd_with_spectrum(&[3.0, 2.0, 1.0, 0.5], seed);
        let pw = run_oja(&c, 2, LocalRule { raw_oja: true, ..LocalRule::default() }, 6000, 0.05, seed + 1);
        prop_assert!(pw.orthonormality_error().unwrap() < 1e-4);
    }
}

#[test]
fn low_rank_fixed_feedback_has_the_requested_rank() {
    let mut rng = Rng::new(31);
    let pw = FeedbackPathway::fixed_random_low_rank(12, 9, 3, 2, &mut rng).unwrap();
    let b = pw.effective_matrix(None).unwrap();
    assert_eq!(b.shape(), (12, 9));
    assert_eq!(svd(&b).unwrap().rank(1e-10), 3);
    assert_eq!(pw.rank(), None);
    assert!(FeedbackPathway::fixed_random_low_rank(12, 9, 10, 2, &mut rng).is_err());
}
