//! Backward pathways: how the error of a downstream (source) layer reaches
//! a hidden layer, and how learned pathways adapt.
//!
//! A pathway owned by hidden layer `l` maps a source error
//! `delta_src` (`n_src x batch`) to `delta_l = (B delta_src) ⊙ f'(a_l)`,
//! where `B` is `n_l x n_src`. For chained feedback the source is layer
//! `l + 1` and `B` stands in for `W_{l+1}^T`; for broadcast feedback the
//! source is a later layer, usually the output.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Which backward map a pathway uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathwayKind {
    /// Exact transpose of the forward weight (backpropagation).
    Transpose,
    /// Fixed random matrix (feedback alignment).
    FixedRandom,
    /// Rank-`r` factors `Q P` trained to approximate the forward transpose.
    FactoredNormative,
    /// Rank-`r` factors with `P` trained by an error-driven Oja rule and
    /// `Q` optionally by a Hebbian rule.
    FactoredLocal,
}

impl PathwayKind {
    pub fn is_factored(self) -> bool {
        matches!(self, PathwayKind::FactoredNormative | PathwayKind::FactoredLocal)
    }
}

/// Switches for the local update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalRule {
    /// Also train `Q` with the Hebbian rule.
    #[serde(default)]
    pub update_q: bool,
    /// Drive the Oja rule with the targets instead of the source error.
    /// Only meaningful when the source is the output layer.
    #[serde(default)]
    pub use_targets: bool,
    /// Plain Oja step: no centering, no max-diagonal normalization, and
    /// `C = D D^T / batch`. Matches the continuous-time idealization.
    #[serde(default)]
    pub raw_oja: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathwayState {
    Transpose,
    FixedRandom { b: Matrix },
    Normative { q: Matrix, p: Matrix },
    Local { q: Matrix, p: Matrix, rule: LocalRule },
}

/// Backward map for one hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPathway {
    /// Index of the layer whose error this pathway reads.
    pub source_layer: usize,
    pub state: PathwayState,
}

/// Learning hyperparameters of the feedback factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackHyper {
    pub eta_fb: f64,
    /// Decay on the factors; distinct from the forward weight decay.
    pub lambda: f64,
    /// Factors are updated on every `update_interval`-th training step.
    pub update_interval: usize,
}

impl Default for FeedbackHyper {
    fn default() -> Self {
        FeedbackHyper {
            eta_fb: 0.01,
            lambda: 0.0,
            update_interval: 1,
        }
    }
}

impl FeedbackHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_fb > 0.0 && self.eta_fb.is_finite()) {
            return Err(Error::InvalidInput(format!("eta_fb must be > 0, got {}", self.eta_fb)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.update_interval == 0 {
            return Err(Error::InvalidInput("update_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a local update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalOutcome {
    Applied,
    /// The driving signal had zero variance; nothing changed.
    Skipped,
}

/// Kaiming-uniform matrix with bound `sqrt(6 / fan)`.
pub fn kaiming_uniform(rng: &mut Rng, rows: usize, cols: usize, fan: usize) -> Matrix {
    let bound = (6.0 / fan.max(1) as f64).sqrt();
    rng.uniform_matrix(rows, cols, bound)
}

fn check_rank(r: usize, n_layer: usize, n_src: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidRank("rank must be >= 1".into()));
    }
    if r > n_layer.min(n_src) {
        return Err(Error::InvalidRank(format!(
            "rank {r} exceeds min(layer width {n_layer}, source width {n_src})"
        )));
    }
    Ok(())
}

impl FeedbackPathway {
    pub fn transpose(source_layer: usize) -> Self {
        FeedbackPathway {
            source_layer,
            state: PathwayState::Transpose,
        }
    }

    /// Fixed random `B` (`n_layer x n_src`). Entries are Kaiming-uniform
    /// with the fan taken over the receiving layer, which puts `B` on the
    /// same scale as the transpose of a Kaiming-initialized forward weight.
    pub fn fixed_random(n_layer: usize, n_src: usize, source_layer: usize, rng: &mut Rng) -> Self {
        FeedbackPathway {
            source_layer,
            state: PathwayState::FixedRandom {
                b: kaiming_uniform(rng, n_layer, n_src, n_layer),
            },
        }
    }

    /// Fixed random `B = Q P` of rank `r`, with `Q` and `P` drawn as for
    /// the factored kinds and then frozen. Propagation still uses the dense
    /// product.
    pub fn fixed_random_low_rank(
        n_layer: usize,
        n_src: usize,
        r: usize,
        source_layer: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (q, p) = Self::random_factors(n_layer, n_src, r, rng)?;
        Ok(FeedbackPathway {
            source_layer,
            state: PathwayState::FixedRandom { b: q.matmul(&p) },
        })
    }

    /// Randomly initialized factors: `Q` (`n_layer x r`) with fan
    /// `n_layer`, `P` (`r x n_src`) with fan `n_src`.
    fn random_factors(n_layer: usize, n_src: usize, r: usize, rng: &mut Rng) -> Result<(Matrix, Matrix)> {
        check_rank(r, n_layer, n_src)?;
        let q = kaiming_uniform(rng, n_layer, r, n_layer);
        let p = kaiming_uniform(rng, r, n_src, n_src);
        Ok((q, p))
    }

    pub fn normative(n_layer: usize, n_src: usize, r: usize, source_layer: usize, rng: &mut Rng) -> Result<Self> {
        let (q, p) = Self::random_factors(n_layer, n_src, r, rng)?;
        Ok(FeedbackPathway {
            source_layer,
            state: PathwayState::Normative { q, p },
        })
    }

    pub fn local(
        n_layer: usize,
        n_src: usize,
        r: usize,
        source_layer: usize,
        rule: LocalRule,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (q, p) = Self::random_factors(n_layer, n_src, r, rng)?;
        Ok(FeedbackPathway {
            source_layer,
            state: PathwayState::Local { q, p, rule },
        })
    }

    /// Factored pathway from explicit factors.
    pub fn from_factors(kind: PathwayKind, q: Matrix, p: Matrix, source_layer: usize, rule: LocalRule) -> Result<Self> {
        if q.cols() != p.rows() {
            return Err(Error::Dimension(format!(
                "Q has {} columns but P has {} rows",
                q.cols(),
                p.rows()
            )));
        }
        check_rank(q.cols(), q.rows(), p.cols())?;
        let state = match kind {
            PathwayKind::FactoredNormative => PathwayState::Normative { q, p },
            PathwayKind::FactoredLocal => PathwayState::Local { q, p, rule },
            other => {
                return Err(Error::Misuse(format!("{other:?} pathways have no factors")));
            }
        };
        Ok(FeedbackPathway { source_layer, state })
    }

    pub fn kind(&self) -> PathwayKind {
        match self.state {
            PathwayState::Transpose => PathwayKind::Transpose,
            PathwayState::FixedRandom { .. } => PathwayKind::FixedRandom,
            PathwayState::Normative { .. } => PathwayKind::FactoredNormative,
            PathwayState::Local { .. } => PathwayKind::FactoredLocal,
        }
    }

    /// Rank of the factorization, if factored.
    pub fn rank(&self) -> Option<usize> {
        self.factors().map(|(q, _)| q.cols())
    }

    pub fn factors(&self) -> Option<(&Matrix, &Matrix)> {
        match &self.state {
            PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. } => Some((q, p)),
            _ => None,
        }
    }

    pub fn factors_mut(&mut self) -> Option<(&mut Matrix, &mut Matrix)> {
        match &mut self.state {
            PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. } => Some((q, p)),
            _ => None,
        }
    }

    pub fn local_rule(&self) -> Option<LocalRule> {
        match self.state {
            PathwayState::Local { rule, .. } => Some(rule),
            _ => None,
        }
    }

    /// `(n_layer, n_src)` when the pathway stores parameters.
    pub fn stored_shape(&self) -> Option<(usize, usize)> {
        match &self.state {
            PathwayState::Transpose => None,
            PathwayState::FixedRandom { b } => Some(b.shape()),
            PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. } => Some((q.rows(), p.cols())),
        }
    }

    /// `delta_l = (B delta_src) ⊙ preact_deriv`.
    ///
    /// `forward_w` (`n_src x n_layer`) must be given for transpose pathways
    /// and must be absent for all others. Factored pathways apply `P` then
    /// `Q` and never form `Q P`.
    pub fn propagate_error(&self, delta_src: &Matrix, preact_deriv: &Matrix, forward_w: Option<&Matrix>) -> Result<Matrix> {
        let batch = delta_src.cols();
        if preact_deriv.cols() != batch {
            return Err(Error::Dimension(format!(
                "error has {batch} columns but derivative has {}",
                preact_deriv.cols()
            )));
        }
        let n_src = delta_src.rows();
        let n_layer = preact_deriv.rows();
        let mixed = match (&self.state, forward_w) {
            (PathwayState::Transpose, Some(w)) => {
                expect_shape("forward weight", w, n_src, n_layer)?;
                w.t_matmul(delta_src)
            }
            (PathwayState::Transpose, None) => {
                return Err(Error::Misuse("transpose pathway needs the forward weight".into()));
            }
            (_, Some(_)) => {
                return Err(Error::Misuse(format!(
                    "{:?} pathway must not read the forward weight",
                    self.kind()
                )));
            }
            (PathwayState::FixedRandom { b }, None) => {
                expect_shape("B", b, n_layer, n_src)?;
                b.matmul(delta_src)
            }
            (PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. }, None) => {
                expect_shape("Q", q, n_layer, q.cols())?;
                expect_shape("P", p, q.cols(), n_src)?;
                q.matmul(&p.matmul(delta_src))
            }
        };
        Ok(mixed.hadamard(preact_deriv))
    }

    /// One gradient step on `L_B = ½‖Q P − Wᵀ‖²`, with both factors
    /// updated from the same residual `E = Wᵀ − Q P`:
    /// `P += η Qᵀ E`, `Q += η E Pᵀ`.
    ///
    /// Reads only the forward weight `forward_w` (`n_src x n_layer`).
    pub fn update_normative(&mut self, forward_w: &Matrix, hyper: &FeedbackHyper) -> Result<()> {
        let PathwayState::Normative { q, p } = &mut self.state else {
            return Err(Error::Misuse(format!(
                "normative update applied to a {:?} pathway",
                self.kind()
            )));
        };
        expect_shape("forward weight", forward_w, p.cols(), q.rows())?;
        let residual = forward_w.t().sub(&q.matmul(p));
        let dp = q.t_matmul(&residual);
        let dq = residual.matmul_t(p);
        p.axpy(hyper.eta_fb, &dp);
        q.axpy(hyper.eta_fb, &dq);
        Ok(())
    }

    /// Oja step on `P` driven by a batch of source errors (or targets):
    /// `P += η P (C/γ)(I − PᵀP) − λ P` with `C = D Dᵀ` of the centered
    /// signal `D` and `γ = max diag C`. With `update_q`, also
    /// `Q += η h (P δ)ᵀ / batch − λ Q` using the pre-update `P`.
    ///
    /// `h_layer` is the activity of the layer receiving the feedback.
    /// Reads no forward weights.
    pub fn update_local(
        &mut self,
        delta_src: &Matrix,
        h_layer: &Matrix,
        targets: Option<&Matrix>,
        hyper: &FeedbackHyper,
    ) -> Result<LocalOutcome> {
        let kind = self.kind();
        let PathwayState::Local { q, p, rule } = &mut self.state else {
            return Err(Error::Misuse(format!("local update applied to a {kind:?} pathway")));
        };
        let (r, n_src) = p.shape();
        expect_shape("source error", delta_src, n_src, delta_src.cols())?;
        let batch = delta_src.cols();
        let signal = if rule.use_targets {
            let t = targets.ok_or_else(|| Error::Misuse("use_targets is set but no targets were given".into()))?;
            expect_shape("targets", t, n_src, batch)?;
            t
        } else {
            delta_src
        };
        let (driver, gamma) = if rule.raw_oja {
            (signal.clone(), batch.max(1) as f64)
        } else {
            let centered = signal.center_columns();
            let gamma = (0..n_src)
                .map(|i| centered.row(i).iter().map(|v| v * v).sum::<f64>())
                .fold(0.0, f64::max);
            (centered, gamma)
        };
        if gamma == 0.0 || (rule.raw_oja && driver.max_abs() == 0.0) {
            warn!("local feedback update skipped: driving signal has zero variance");
            return Ok(LocalOutcome::Skipped);
        }

        // P C computed as (P D) Dᵀ so the n_src x n_src covariance is never formed.
        let pc = p.matmul(&driver).matmul_t(&driver).scale(1.0 / gamma);
        let pcp = pc.matmul_t(p);
        let dp = pc.sub(&pcp.matmul(p));

        let dq = if rule.update_q {
            expect_shape("layer activity", h_layer, q.rows(), batch)?;
            let projected = p.matmul(delta_src);
            Some(h_layer.matmul_t(&projected).scale(1.0 / batch as f64))
        } else {
            None
        };

        let decay = 1.0 - hyper.lambda;
        if hyper.lambda != 0.0 {
            p.scale_in_place(decay);
        }
        p.axpy(hyper.eta_fb, &dp);
        if let Some(dq) = dq {
            if hyper.lambda != 0.0 {
                q.scale_in_place(decay);
            }
            q.axpy(hyper.eta_fb, &dq);
        }
        debug_assert_eq!(p.rows(), r);
        Ok(LocalOutcome::Applied)
    }

    /// The backward map as a dense `n_layer x n_src` matrix, for analysis.
    pub fn effective_matrix(&self, forward_w: Option<&Matrix>) -> Result<Matrix> {
        match &self.state {
            PathwayState::Transpose => forward_w
                .map(Matrix::t)
                .ok_or_else(|| Error::Misuse("transpose pathway needs the forward weight".into())),
            PathwayState::FixedRandom { b } => Ok(b.clone()),
            PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. } => Ok(q.matmul(p)),
        }
    }

    /// `‖P Pᵀ − I‖_F` for factored pathways.
    pub fn orthonormality_error(&self) -> Option<f64> {
        self.factors()
            .map(|(_, p)| p.matmul_t(p).sub(&Matrix::identity(p.rows())).frobenius_norm())
    }
}

fn expect_shape(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}
