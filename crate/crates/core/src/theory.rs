//! Continuous-time learning dynamics of a two-layer linear network in the
//! singular basis of the input-output covariance.
//!
//! With `Σ_io = U S Vᵀ` and whitened inputs, the rotated weights
//! `W̄₁ = W₁ V`, `W̄₂ = Uᵀ W₂` and feedback `P̄ = P U`, `B̄ = B U` obey
//! closed ODE systems driven by the error `Ē = S − W̄₂ W̄₁`:
//!
//! * fixed feedback: `τ dW̄₁ = B̄ Ē`, `τ dW̄₂ = Ē W̄₁ᵀ`;
//! * normative: forward as above with `B̄ = Q P̄`, plus
//!   `τ_B dP̄ = Qᵀ (W̄₂ᵀ − Q P̄)`, `τ_B dQ = (W̄₂ᵀ − Q P̄) P̄ᵀ`;
//! * local Oja: `τ_B dP̄ = P̄ S Sᵀ (I − P̄ᵀ P̄) − λ P̄` and, when enabled,
//!   `τ_B dQ = W̄₁ Ēᵀ P̄ᵀ`.
//!
//! `U` and `V` are completed to full orthonormal bases so rotations are
//! exactly invertible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SvdTriple};
use crate::metrics::subspace_alignment;
use crate::trajectory::{Trajectory, TrajectoryPoint};

/// Which feedback dynamics drive `W̄₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Feedback held fixed (`B̄`, or `Q P̄` if no `B̄` is given).
    FixedFeedback,
    /// `Q`, `P̄` follow gradient flow on `½‖Q P̄ − W̄₂ᵀ‖²`.
    Normative,
    /// `P̄` follows the Oja flow on `S Sᵀ`; `Q` optionally Hebbian.
    LocalOja,
}

/// State of the rotated system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedState {
    /// `k x n`.
    pub w1b: Matrix,
    /// `m x k`.
    pub w2b: Matrix,
    /// `r x m`.
    pub pb: Option<Matrix>,
    /// `k x r`.
    pub q: Option<Matrix>,
    /// Fixed feedback `k x m`.
    pub bb: Option<Matrix>,
    /// Rectangular diagonal `m x n`, nonincreasing.
    pub s: Matrix,
}

impl RotatedState {
    /// Feedback matrix seen by `W̄₁`.
    pub fn feedback(&self) -> Option<Matrix> {
        match (&self.bb, &self.q, &self.pb) {
            (Some(b), _, _) => Some(b.clone()),
            (None, Some(q), Some(p)) => Some(q.matmul(p)),
            _ => None,
        }
    }

    /// `W̄₂ W̄₁`.
    pub fn product(&self) -> Matrix {
        self.w2b.matmul(&self.w1b)
    }

    /// Mode overlaps `(W̄₂ W̄₁)_ii / s_i` for the first `count` modes.
    pub fn overlaps(&self, count: usize) -> Vec<f64> {
        let prod = self.product();
        (0..count.min(self.s.rows().min(self.s.cols())))
            .map(|i| prod.get(i, i) / self.s.get(i, i))
            .collect()
    }

    /// `½ ‖S − W̄₂ W̄₁‖²`.
    pub fn excess_loss(&self) -> f64 {
        let e = self.s.sub(&self.product()).frobenius_norm();
        0.5 * e * e
    }

    fn validate(&self, regime: Regime) -> Result<()> {
        let (k, n) = self.w1b.shape();
        let (m, k2) = self.w2b.shape();
        if k != k2 || self.s.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "W̄₁ {k}x{n}, W̄₂ {m}x{k2}, S {}x{} do not chain",
                self.s.rows(),
                self.s.cols()
            )));
        }
        for i in 1..m.min(n) {
            if self.s.get(i, i) > self.s.get(i - 1, i - 1) {
                return Err(Error::InvalidInput("S must be nonincreasing".into()));
            }
        }
        if let Some(b) = &self.bb {
            if b.shape() != (k, m) {
                return Err(Error::Dimension(format!("B̄ is {}x{}, expected {k}x{m}", b.rows(), b.cols())));
            }
        }
        match (&self.q, &self.pb) {
            (Some(q), Some(p)) => {
                if q.rows() != k || p.cols() != m || q.cols() != p.rows() {
                    return Err(Error::Dimension(format!(
                        "Q {}x{} and P̄ {}x{} do not fit k = {k}, m = {m}",
                        q.rows(),
                        q.cols(),
                        p.rows(),
                        p.cols()
                    )));
                }
            }
            (None, None) => {}
            _ => return Err(Error::InvalidInput("Q and P̄ must be given together".into())),
        }
        let needs_factors = matches!(regime, Regime::Normative | Regime::LocalOja);
        if needs_factors && self.pb.is_none() {
            return Err(Error::InvalidInput(format!("{regime:?} regime needs Q and P̄")));
        }
        if regime == Regime::FixedFeedback && self.feedback().is_none() {
            return Err(Error::InvalidInput("fixed-feedback regime needs B̄ or Q, P̄".into()));
        }
        Ok(())
    }

    fn max_abs(&self) -> f64 {
        [Some(&self.w1b), Some(&self.w2b), self.pb.as_ref(), self.q.as_ref()]
            .into_iter()
            .flatten()
            .map(Matrix::max_abs)
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        [Some(&self.w1b), Some(&self.w2b), self.pb.as_ref(), self.q.as_ref()]
            .into_iter()
            .flatten()
            .all(Matrix::is_finite)
    }

    /// Largest absolute entrywise difference over the evolving fields.
    pub fn max_abs_diff(&self, other: &RotatedState) -> f64 {
        let mut d = self.w1b.max_abs_diff(&other.w1b).max(self.w2b.max_abs_diff(&other.w2b));
        if let (Some(a), Some(b)) = (&self.pb, &other.pb) {
            d = d.max(a.max_abs_diff(b));
        }
        if let (Some(a), Some(b)) = (&self.q, &other.q) {
            d = d.max(a.max_abs_diff(b));
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub dt: f64,
    pub tau: f64,
    pub tau_b: f64,
    /// Decay on `P̄` in the local regime.
    pub lambda: f64,
    pub t_end: f64,
    pub regime: Regime,
    /// Evolve `Q` in the local regime.
    pub update_q: bool,
    /// Keep every `record_every`-th step (the first and last are always kept).
    pub record_every: usize,
}

impl OdeConfig {
    pub fn new(regime: Regime, dt: f64, t_end: f64) -> Self {
        OdeConfig {
            dt,
            tau: 1.0,
            tau_b: 1.0,
            lambda: 0.0,
            t_end,
            regime,
            update_q: false,
            record_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.dt) || !positive(self.tau) || !positive(self.tau_b) {
            return Err(Error::InvalidInput("dt, tau and tau_b must be positive".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidInput("t_end must be >= 0".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidInput("lambda must be >= 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of integration steps to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Time derivative of every evolving field.
struct Rates {
    w1: Matrix,
    w2: Matrix,
    p: Option<Matrix>,
    q: Option<Matrix>,
}

impl Rates {
    fn norm(&self) -> f64 {
        let mut s = self.w1.frobenius_norm().powi(2) + self.w2.frobenius_norm().powi(2);
        for m in [&self.p, &self.q].into_iter().flatten() {
            s += m.frobenius_norm().powi(2);
        }
        s.sqrt()
    }
}

fn rates(state: &RotatedState, cfg: &OdeConfig) -> Rates {
    let err = state.s.sub(&state.product());
    let feedback = state.feedback().expect("validated");
    let w1 = feedback.matmul(&err).scale(1.0 / cfg.tau);
    let w2 = err.matmul_t(&state.w1b).scale(1.0 / cfg.tau);
    let (mut p, mut q) = (None, None);
    match cfg.regime {
        Regime::FixedFeedback => {}
        Regime::Normative => {
            let (qm, pm) = (state.q.as_ref().unwrap(), state.pb.as_ref().unwrap());
            let resid = state.w2b.t().sub(&qm.matmul(pm));
            p = Some(qm.t_matmul(&resid).scale(1.0 / cfg.tau_b));
            q = Some(resid.matmul_t(pm).scale(1.0 / cfg.tau_b));
        }
        Regime::LocalOja => {
            let pm = state.pb.as_ref().unwrap();
            let ss = state.s.matmul_t(&state.s);
            let pc = pm.matmul(&ss);
            let mut dp = pc.sub(&pc.matmul_t(pm).matmul(pm));
            if cfg.lambda != 0.0 {
                dp.axpy(-cfg.lambda, pm);
            }
            p = Some(dp.scale(1.0 / cfg.tau_b));
            if cfg.update_q {
                q = Some(state.w1b.matmul_t(&err).matmul_t(pm).scale(1.0 / cfg.tau_b));
            }
        }
    }
    Rates { w1, w2, p, q }
}

fn shifted(state: &RotatedState, k: &Rates, h: f64) -> RotatedState {
    let mut out = state.clone();
    out.w1b.axpy(h, &k.w1);
    out.w2b.axpy(h, &k.w2);
    if let (Some(p), Some(dp)) = (out.pb.as_mut(), k.p.as_ref()) {
        p.axpy(h, dp);
    }
    if let (Some(q), Some(dq)) = (out.q.as_mut(), k.q.as_ref()) {
        q.axpy(h, dq);
    }
    out
}

fn rk4_step(state: &RotatedState, cfg: &OdeConfig) -> RotatedState {
    let h = cfg.dt;
    let k1 = rates(state, cfg);
    let k2 = rates(&shifted(state, &k1, h / 2.0), cfg);
    let k3 = rates(&shifted(state, &k2, h / 2.0), cfg);
    let k4 = rates(&shifted(state, &k3, h), cfg);
    let mut out = shifted(state, &k1, h / 6.0);
    for (k, w) in [(&k2, h / 3.0), (&k3, h / 3.0), (&k4, h / 6.0)] {
        out = shifted(&out, k, w);
    }
    out
}

/// Samples of an integration run.
#[derive(Clone, Debug)]
pub struct OdeTrajectory {
    /// `(step, t, state)`.
    pub samples: Vec<(usize, f64, RotatedState)>,
    /// Norm of the time derivative at the final state.
    pub final_rate: f64,
}

/// Terminal states whose derivative norm is below this are stationary.
pub const STATIONARY_RATE: f64 = 1e-8;
/// Any entry above this magnitude counts as a blow-up.
pub const BLOW_UP: f64 = 1e8;

impl OdeTrajectory {
    pub fn terminal(&self) -> &RotatedState {
        &self.samples.last().expect("at least the initial state").2
    }

    pub fn stationary(&self) -> bool {
        self.final_rate < STATIONARY_RATE
    }

    /// Trajectory records with `count` mode overlaps. The loss column holds
    /// `½‖S − W̄₂W̄₁‖² + loss_offset`; pass the irreducible part of the
    /// training loss as the offset to make it comparable to simulations.
    pub fn to_trajectory(&self, count: usize, loss_offset: f64) -> Trajectory {
        let points = self
            .samples
            .iter()
            .map(|(step, t, st)| {
                let (pp, angle) = match &st.pb {
                    Some(p) => {
                        let orth = p.matmul_t(p).sub(&Matrix::identity(p.rows())).frobenius_norm();
                        let reference = Matrix::identity(p.cols()).column_range(0, p.rows());
                        let angle = subspace_alignment(p, &reference).ok().map(|a| a.max_angle());
                        (Some(orth), angle)
                    }
                    None => (None, None),
                };
                TrajectoryPoint {
                    step: *step,
                    time: *t,
                    loss: st.excess_loss() + loss_offset,
                    accuracy: None,
                    lambdas: Some(st.overlaps(count)),
                    pp_orth_err: pp,
                    subspace_angle_max: angle,
                    cum_macs: None,
                }
            })
            .collect();
        Trajectory {
            points,
            lambda_count: count,
        }
    }
}

/// Fixed-step classical Runge–Kutta integration.
pub fn integrate(state: &RotatedState, cfg: &OdeConfig) -> Result<OdeTrajectory> {
    cfg.validate()?;
    state.validate(cfg.regime)?;
    let steps = cfg.steps();
    let mut current = state.clone();
    let mut samples = vec![(0, 0.0, current.clone())];
    for step in 1..=steps {
        current = rk4_step(&current, cfg);
        let t = step as f64 * cfg.dt;
        if !current.is_finite() || current.max_abs() > BLOW_UP {
            return Err(Error::OdeDivergence {
                time: t,
                detail: format!("state magnitude exceeded {BLOW_UP:e}"),
            });
        }
        if step % cfg.record_every == 0 || step == steps {
            samples.push((step, t, current.clone()));
        }
    }
    let final_rate = rates(&current, cfg).norm();
    Ok(OdeTrajectory { samples, final_rate })
}

/// Integrates at `dt` and at `dt / 2` and returns the largest entrywise
/// difference between the two terminal states.
pub fn step_halving_error(state: &RotatedState, cfg: &OdeConfig) -> Result<f64> {
    let coarse = integrate(state, &OdeConfig { record_every: usize::MAX, ..*cfg })?;
    let fine = integrate(
        state,
        &OdeConfig {
            dt: cfg.dt / 2.0,
            record_every: usize::MAX,
            ..*cfg
        },
    )?;
    Ok(coarse.terminal().max_abs_diff(fine.terminal()))
}

/// `‖B̄ (S − W̄₂ W̄₁)‖_F`: zero exactly at stationary points of the forward
/// dynamics under fixed feedback `B̄`.
pub fn fixed_point_residual(feedback: &Matrix, s: &Matrix, w2w1: &Matrix) -> f64 {
    feedback.matmul(&s.sub(w2w1)).frobenius_norm()
}

/// Mode overlaps of a network map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeOverlaps {
    /// `u_iᵀ M v_i / s_i` for every reported mode.
    pub values: Vec<f64>,
    /// Indices (0-based) of modes skipped because `s_i < 1e-10`.
    pub skipped: Vec<usize>,
}

/// Overlaps of the end-to-end map `map` with the first `count` singular
/// modes of `svd_io`.
pub fn mode_overlaps_of_map(map: &Matrix, svd_io: &SvdTriple, count: usize) -> ModeOverlaps {
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for i in 0..count.min(svd_io.s.len()) {
        let s = svd_io.s[i];
        if s < 1e-10 {
            skipped.push(i);
            continue;
        }
        let u = svd_io.u.col(i);
        let v = svd_io.v.col(i);
        let mut acc = 0.0;
        for (a, ua) in u.iter().enumerate() {
            let row = map.row(a);
            acc += ua * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        values.push(acc / s);
    }
    ModeOverlaps { values, skipped }
}

/// `Λ_i = u_iᵀ (W₂ W₁) v_i / s_i` over all modes of `svd_io`.
pub fn mode_overlaps(w1: &Matrix, w2: &Matrix, svd_io: &SvdTriple) -> ModeOverlaps {
    mode_overlaps_of_map(&w2.matmul(w1), svd_io, svd_io.s.len())
}

/// Full orthonormal bases from the decomposition of `Σ_io` (`m x n`).
#[derive(Clone, Debug, PartialEq)]
pub struct RotationBasis {
    /// `m x m`.
    pub u: Matrix,
    /// `n x n`.
    pub v: Matrix,
    /// `m x n` rectangular diagonal.
    pub s: Matrix,
}

impl RotationBasis {
    pub fn new(svd_io: &SvdTriple) -> Self {
        let u = svd_io.full_u();
        let v = svd_io.full_v();
        let s = Matrix::rect_diag(u.rows(), v.rows(), &svd_io.s);
        RotationBasis { u, v, s }
    }
}

/// Parameters of a two-layer linear network in original coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearNetState {
    /// `k x n`.
    pub w1: Matrix,
    /// `m x k`.
    pub w2: Matrix,
    /// `r x m`.
    pub p: Option<Matrix>,
    /// `k x r`.
    pub q: Option<Matrix>,
    /// Fixed feedback, `k x m`.
    pub b: Option<Matrix>,
}

/// `W̄₁ = W₁ V`, `W̄₂ = Uᵀ W₂`, `P̄ = P U`, `B̄ = B U`; `Q` is unchanged.
pub fn rotate_in(net: &LinearNetState, basis: &RotationBasis) -> RotatedState {
    RotatedState {
        w1b: net.w1.matmul(&basis.v),
        w2b: basis.u.t_matmul(&net.w2),
        pb: net.p.as_ref().map(|p| p.matmul(&basis.u)),
        q: net.q.clone(),
        bb: net.b.as_ref().map(|b| b.matmul(&basis.u)),
        s: basis.s.clone(),
    }
}

/// Inverse of [`rotate_in`].
pub fn rotate_out(state: &RotatedState, basis: &RotationBasis) -> LinearNetState {
    LinearNetState {
        w1: state.w1b.matmul_t(&basis.v),
        w2: basis.u.matmul(&state.w2b),
        p: state.pb.as_ref().map(|p| p.matmul_t(&basis.u)),
        q: state.q.clone(),
        b: state.bb.as_ref().map(|b| b.matmul_t(&basis.u)),
    }
}
