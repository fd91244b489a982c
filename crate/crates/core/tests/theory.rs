use ldfa_core::feedback::{FeedbackHyper, PathwayKind};
use ldfa_core::linalg::{svd, Matrix};
use ldfa_core::metrics::subspace_alignment;
use ldfa_core::network::{train, Activation, Loss, Network, PathwaySpec, TrainConfig, TrainData, WeightInit};
use ldfa_core::tasks::{make_linear_task, LinearTaskSpec};
use ldfa_core::theory::{
    fixed_point_residual, integrate, rotate_in, rotate_out, step_halving_error, LinearNetState, OdeConfig, Regime,
    RotatedState, RotationBasis,
};
use ldfa_core::Rng;

fn diag_s(m: usize, n: usize, values: &[f64]) -> Matrix {
    Matrix::rect_diag(m, n, values)
}

fn small_state(rng: &mut Rng, k: usize, s: &Matrix, std: f64) -> RotatedState {
    RotatedState {
        w1b: rng.gaussian_matrix(k, s.cols(), std),
        w2b: rng.gaussian_matrix(s.rows(), k, std),
        pb: None,
        q: None,
        bb: None,
        s: s.clone(),
    }
}

#[test]
fn full_rank_fixed_feedback_reaches_backprop_solution() {
    let s = diag_s(3, 4, &[3.0, 2.0, 1.0]);
    let mut rng = Rng::new(1);
    let mut state = small_state(&mut rng, 5, &s, 0.1);
    state.bb = Some(rng.gaussian_matrix(5, 3, 1.0));
    let run = integrate(&state, &OdeConfig::new(Regime::FixedFeedback, 0.01, 60.0)).unwrap();
    let end = run.terminal();
    assert!(end.product().sub(&s).frobenius_norm() < 1e-3);
    assert!(run.stationary());
    for l in end.overlaps(3) {
        assert!((l - 1.0).abs() < 1e-3);
    }
}

#[test]
fn local_oja_flow_finds_top_rows_of_s() {
    let s = diag_s(4, 5, &[2.0, 1.5, 1.0, 0.5]);
    let mut rng = Rng::new(2);
    let mut state = small_state(&mut rng, 6, &s, 0.1);
    state.pb = Some(rng.gaussian_matrix(2, 4, 0.5));
    state.q = Some(rng.gaussian_matrix(6, 2, 0.5));
    let run = integrate(&state, &OdeConfig::new(Regime::LocalOja, 0.01, 40.0)).unwrap();
    let p = run.terminal().pb.clone().unwrap();
    let orth = p.matmul_t(&p).sub(&Matrix::identity(2)).frobenius_norm();
    assert!(orth < 1e-4, "orthonormality error {orth}");
    let top = Matrix::identity(4).column_range(0, 2);
    let angle = subspace_alignment(&p, &top).unwrap().max_angle();
    assert!(angle < 1e-3, "angle {angle}");

    let traj = run.to_trajectory(2, 0.0);
    let last = traj.last().unwrap();
    assert!(last.pp_orth_err.unwrap() < 1e-4);
    assert!(last.subspace_angle_max.unwrap() < 1e-3);
    assert!(last.cum_macs.is_none());
}

#[test]
fn halving_the_step_barely_moves_the_end_state() {
    let s = diag_s(3, 4, &[3.0, 2.0, 1.0]);
    let mut rng = Rng::new(3);
    let mut state = small_state(&mut rng, 5, &s, 0.1);
    state.pb = Some(rng.gaussian_matrix(2, 3, 0.5));
    state.q = Some(rng.gaussian_matrix(5, 2, 0.5));
    for regime in [Regime::FixedFeedback, Regime::Normative, Regime::LocalOja] {
        let err = step_halving_error(&state, &OdeConfig::new(regime, 0.01, 10.0)).unwrap();
        assert!(err < 1e-4, "{regime:?}: {err}");
    }
}

#[test]
fn rotation_round_trip_is_exact() {
    let mut rng = Rng::new(4);
    let sigma = rng.gaussian_matrix(5, 7, 1.0);
    let basis = RotationBasis::new(&svd(&sigma).unwrap());
    let net = LinearNetState {
        w1: rng.gaussian_matrix(6, 7, 1.0),
        w2: rng.gaussian_matrix(5, 6, 1.0),
        p: Some(rng.gaussian_matrix(2, 5, 1.0)),
        q: Some(rng.gaussian_matrix(6, 2, 1.0)),
        b: Some(rng.gaussian_matrix(6, 5, 1.0)),
    };
    let back = rotate_out(&rotate_in(&net, &basis), &basis);
    assert!(back.w1.max_abs_diff(&net.w1) < 1e-12);
    assert!(back.w2.max_abs_diff(&net.w2) < 1e-12);
    assert!(back.p.unwrap().max_abs_diff(net.p.as_ref().unwrap()) < 1e-12);
    assert!(back.b.unwrap().max_abs_diff(net.b.as_ref().unwrap()) < 1e-12);
    assert_eq!(back.q, net.q);
}

#[test]
fn blow_up_is_reported_with_its_time() {
    // Positive feedback on an already large state runs away.
    let s = diag_s(1, 1, &[1.0]);
    let state = RotatedState {
        w1b: Matrix::from_vec(1, 1, vec![100.0]).unwrap(),
        w2b: Matrix::from_vec(1, 1, vec![-100.0]).unwrap(),
        pb: None,
        q: None,
        bb: Some(Matrix::from_vec(1, 1, vec![-1.0]).unwrap()),
        s,
    };
    match integrate(&state, &OdeConfig::new(Regime::FixedFeedback, 1e-3, 10.0)) {
        Err(ldfa_core::Error::OdeDivergence { time, .. }) => assert!(time > 0.0 && time <= 10.0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

/// Two modes, feedback that only sees mode 1, and a state with nothing in
/// mode 2: mode 2 never gets an error signal, so the flow stops with the
/// residual at zero and the second overlap stuck at 0.
#[test]
fn low_rank_feedback_has_spurious_stationary_points() {
    let s = diag_s(2, 2, &[2.0, 1.0]);
    let state = RotatedState {
        w1b: Matrix::diag(&[0.1, 0.0]),
        w2b: Matrix::diag(&[0.1, 0.0]),
        pb: None,
        q: None,
        bb: Some(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap()),
        s: s.clone(),
    };
    let run = integrate(&state, &OdeConfig::new(Regime::FixedFeedback, 0.01, 60.0)).unwrap();
    let end = run.terminal();
    let residual = fixed_point_residual(end.bb.as_ref().unwrap(), &s, &end.product());
    assert!(residual < 1e-8, "residual {residual}");
    assert!(run.stationary());
    let overlaps = end.overlaps(2);
    assert!((overlaps[0] - 1.0).abs() < 1e-6);
    assert!((overlaps[1] - 1.0).abs() > 0.1);
}

#[test]
fn stationarity_coincides_with_vanishing_residual() {
    let s = diag_s(3, 3, &[2.0, 1.5, 1.0]);
    let mut rng = Rng::new(5);
    let mut state = small_state(&mut rng, 4, &s, 0.1);
    state.bb = Some(rng.gaussian_matrix(4, 3, 1.0));
    let early = integrate(&state, &OdeConfig::new(Regime::FixedFeedback, 0.01, 0.5)).unwrap();
    let late = integrate(&state, &OdeConfig::new(Regime::FixedFeedback, 0.01, 80.0)).unwrap();
    let residual = |st: &RotatedState| fixed_point_residual(st.bb.as_ref().unwrap(), &s, &st.product());
    assert!(!early.stationary() && residual(early.terminal()) > 1e-3);
    assert!(late.stationary() && residual(late.terminal()) < 1e-8);
}

#[test]
fn normative_feedback_with_enough_rank_recovers_every_mode() {
    let d = 3;
    let s = diag_s(4, 6, &[3.0, 2.0, 1.0, 0.0]);
    let mut rng = Rng::new(6);
    let mut state = small_state(&mut rng, 5, &s, 1e-3);
    state.pb = Some(rng.uniform_matrix(d, 4, 0.5));
    state.q = Some(rng.uniform_matrix(5, d, 0.5));
    let run = integrate(&state, &OdeConfig::new(Regime::Normative, 0.01, 60.0)).unwrap();
    for (i, l) in run.terminal().overlaps(d).iter().enumerate() {
        assert!((l - 1.0).abs() <= 0.01, "mode {i}: {l}");
    }
}

/// Trains the two-layer linear network in original coordinates and
/// integrates the rotated flow from the same initial weights; returns the
/// largest gap between the two overlap curves.
fn simulation_vs_flow(kind: PathwayKind, regime: Regime, rank: Option<usize>, seed: u64) -> f64 {
    let (n, k, m, d) = (16, 12, 8, 3);
    let task = make_linear_task(&LinearTaskSpec::new(n, m, d, 32, 1.0, seed).whitened()).unwrap();
    let mut net = Network::build(
        &[n, k, m],
        &[Activation::Linear; 2],
        &[PathwaySpec::chained(kind, rank)],
        Loss::SquaredError,
        WeightInit::Gaussian { std: 1e-3 },
        seed,
    )
    .unwrap();
    let pw = net.pathways[0].clone().unwrap();
    let (q, p) = match pw.factors() {
        Some((q, p)) => (Some(q.clone()), Some(p.clone())),
        None => (None, None),
    };
    let b = match &pw.state {
        ldfa_core::feedback::PathwayState::FixedRandom { b } => Some(b.clone()),
        _ => None,
    };
    let start = LinearNetState {
        w1: net.layers[0].w.clone(),
        w2: net.layers[1].w.clone(),
        p,
        q,
        b,
    };
    let t = svd(&task.input_output_covariance()).unwrap();
    let basis = RotationBasis::new(&t);

    let (eta, steps, every) = (1e-3, 5000, 50);
    let cfg = TrainConfig {
        eta,
        steps,
        record_every: every,
        feedback: FeedbackHyper {
            eta_fb: eta,
            ..FeedbackHyper::default()
        },
        ..TrainConfig::default()
    };
    let sim = train(&mut net, TrainData::Linear(&task), &cfg).unwrap();
    let mut ode = OdeConfig::new(regime, eta, steps as f64 * eta);
    ode.record_every = every;
    let flow = integrate(&rotate_in(&start, &basis), &ode).unwrap().to_trajectory(d, 0.0);

    assert_eq!(sim.points.len(), flow.points.len());
    let mut worst: f64 = 0.0;
    for (a, b) in sim.points.iter().zip(&flow.points) {
        assert_eq!(a.step, b.step);
        for (x, y) in a.lambdas.as_ref().unwrap().iter().zip(b.lambdas.as_ref().unwrap()) {
            worst = worst.max((x - y).abs());
        }
    }
    let end = sim.last().unwrap().lambdas.clone().unwrap();
    assert!(end.iter().all(|l| (l - 1.0).abs() < 0.05), "run did not converge: {end:?}");
    worst
}

#[test]
fn discrete_training_tracks_fixed_feedback_flow() {
    let gap = simulation_vs_flow(PathwayKind::FixedRandom, Regime::FixedFeedback, None, 7);
    assert!(gap <= 0.05, "gap {gap}");
}

#[test]
fn discrete_training_tracks_normative_flow() {
    let gap = simulation_vs_flow(PathwayKind::FactoredNormative, Regime::Normative, Some(3), 8);
    assert!(gap <= 0.05, "gap {gap}");
}
