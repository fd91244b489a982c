//! Cost accounting and diagnostics.
//!
//! Costs are multiply-accumulates (MACs) of matrix products; elementwise
//! work (activations, derivatives, Hadamard products) is not counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{FeedbackPathway, PathwayKind, PathwayState};
use crate::linalg::{svd, Matrix};
use crate::network::Network;
use crate::trajectory::Trajectory;

/// Per-example MACs to send an error across one pathway from a source
/// layer of width `n_out` to a layer of width `n_in`: `n_in * n_out` for
/// dense maps, `r * (n_in + n_out)` for factored ones.
pub fn backward_flops(n_in: usize, n_out: usize, kind: PathwayKind, r: usize) -> u64 {
    if kind.is_factored() {
        (r * (n_in + n_out)) as u64
    } else {
        (n_in * n_out) as u64
    }
}

/// Rank at which factored and dense backward costs coincide.
pub fn break_even_rank(n_in: usize, n_out: usize) -> f64 {
    (n_in * n_out) as f64 / (n_in + n_out) as f64
}

/// MACs of one feedback-factor update on a batch. Zero for pathways that
/// do not learn.
pub fn feedback_update_macs(pw: &FeedbackPathway, batch: usize) -> u64 {
    let Some((q, p)) = pw.factors() else { return 0 };
    let (n_layer, r, n_src) = (q.rows() as u64, q.cols() as u64, p.cols() as u64);
    let batch = batch as u64;
    match &pw.state {
        // Q P, Qᵀ E and E Pᵀ.
        PathwayState::Normative { .. } => 3 * r * n_layer * n_src,
        PathwayState::Local { rule, .. } => {
            // (P D) Dᵀ, then (P C Pᵀ) P.
            let mut macs = 2 * r * n_src * batch + 2 * r * r * n_src;
            if rule.update_q {
                macs += r * n_src * batch + n_layer * r * batch;
            }
            macs
        }
        _ => 0,
    }
}

/// Per-layer share of the per-example cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerFlops {
    /// Index of the weight layer (`W_layer`).
    pub layer: usize,
    pub forward_macs: f64,
    pub backward_error_macs: f64,
    pub weight_update_macs: f64,
    pub feedback_update_macs: f64,
}

/// Per-example training cost of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopReport {
    pub batch: usize,
    pub update_interval: usize,
    pub layers: Vec<LayerFlops>,
    pub forward_macs: f64,
    pub backward_error_macs: f64,
    pub weight_update_macs: f64,
    /// Feedback-factor update cost divided by `batch * update_interval`.
    pub feedback_update_macs: f64,
    pub total_macs: f64,
}

/// Cost model for one training example. The backward cost of hidden layer
/// `l` is booked on layer `l`; feedback updates are amortized over the
/// batch and the update interval.
pub fn flop_report(net: &Network, batch: usize, update_interval: usize) -> Result<FlopReport> {
    if batch == 0 || update_interval == 0 {
        return Err(Error::InvalidInput("batch and update_interval must be >= 1".into()));
    }
    let widths = net.widths();
    let mut layers: Vec<LayerFlops> = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let dense = (l.w.rows() * l.w.cols()) as f64;
            LayerFlops {
                layer: i + 1,
                forward_macs: dense,
                backward_error_macs: 0.0,
                weight_update_macs: dense,
                feedback_update_macs: 0.0,
            }
        })
        .collect();
    for (idx, pw) in net.pathways.iter().enumerate() {
        let Some(pw) = pw else { continue };
        let layer = idx + 1;
        let (n_layer, n_src) = (widths[layer], widths[pw.source_layer]);
        let r = pw.rank().unwrap_or(0);
        let entry = &mut layers[layer - 1];
        entry.backward_error_macs = backward_flops(n_layer, n_src, pw.kind(), r) as f64;
        entry.feedback_update_macs =
            feedback_update_macs(pw, batch) as f64 / (batch as f64 * update_interval as f64);
    }
    let sum = |f: fn(&LayerFlops) -> f64| layers.iter().map(f).sum::<f64>();
    let forward_macs = sum(|l| l.forward_macs);
    let backward_error_macs = sum(|l| l.backward_error_macs);
    let weight_update_macs = sum(|l| l.weight_update_macs);
    let feedback = sum(|l| l.feedback_update_macs);
    Ok(FlopReport {
        batch,
        update_interval,
        layers,
        forward_macs,
        backward_error_macs,
        weight_update_macs,
        feedback_update_macs: feedback,
        total_macs: forward_macs + backward_error_macs + weight_update_macs + feedback,
    })
}

/// Exact MACs of one training step on a batch, including a feedback
/// update when `feedback_updated`.
pub fn training_step_macs(net: &Network, batch: usize, feedback_updated: bool) -> u64 {
    let widths = net.widths();
    let b = batch as u64;
    let dense: u64 = net.layers.iter().map(|l| (l.w.rows() * l.w.cols()) as u64).sum();
    let mut macs = 2 * dense * b;
    for (idx, pw) in net.pathways.iter().enumerate() {
        let Some(pw) = pw else { continue };
        let layer = idx + 1;
        let r = pw.rank().unwrap_or(0);
        macs += backward_flops(widths[layer], widths[pw.source_layer], pw.kind(), r) * b;
        if feedback_updated {
            macs += feedback_update_macs(pw, batch);
        }
    }
    macs
}

/// Principal angles between two subspaces, in radians, nondecreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceAlignment {
    pub principal_angles: Vec<f64>,
    /// Set when the row space of `p` had lower dimension than its row
    /// count; the missing angles are reported as π/2.
    pub rank_deficient: bool,
}

impl SubspaceAlignment {
    pub fn max_angle(&self) -> f64 {
        self.principal_angles.iter().copied().fold(0.0, f64::max)
    }
}

/// Principal angles between the row space of `p` (`r x m`) and the column
/// space of `reference` (`m x k`, orthonormal columns). One angle per row
/// of `p`.
pub fn subspace_alignment(p: &Matrix, reference: &Matrix) -> Result<SubspaceAlignment> {
    if p.cols() != reference.rows() {
        return Err(Error::Dimension(format!(
            "P has {} columns but the reference basis has {} rows",
            p.cols(),
            reference.rows()
        )));
    }
    let r = p.rows();
    let basis = orthonormal_row_basis(p)?;
    let rank = basis.cols();
    let count = rank.min(reference.cols());

    let mut cos = svd(&basis.t_matmul(reference))?.s;
    cos.truncate(count);
    let residual = reference.sub(&basis.matmul(&basis.t_matmul(reference)));
    let mut sin = svd(&residual)?.s;
    sin.reverse();
    sin.truncate(count);

    let mut angles: Vec<f64> = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            // acos loses precision near 0 and asin near π/2.
            let a = if c * c < 0.5 { c.min(1.0).acos() } else { s.min(1.0).asin() };
            a.clamp(0.0, std::f64::consts::FRAC_PI_2)
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    let rank_deficient = angles.len() < r;
    angles.resize(r, std::f64::consts::FRAC_PI_2);
    Ok(SubspaceAlignment {
        principal_angles: angles,
        rank_deficient,
    })
}

/// Orthonormal basis (as columns) of the row space of `p`.
fn orthonormal_row_basis(p: &Matrix) -> Result<Matrix> {
    let t = svd(&p.t())?;
    let keep = t.rank(1e-10);
    Ok(t.u.column_range(0, keep))
}

/// Cumulative MACs at the first record whose accuracy reaches
/// `target_fraction` of the final recorded accuracy. `None` when never
/// reached.
pub fn flops_to_accuracy(traj: &Trajectory, target_fraction: f64) -> Result<Option<u64>> {
    let final_acc = traj
        .points
        .iter()
        .rev()
        .find_map(|p| p.accuracy)
        .ok_or_else(|| {
            if traj.is_empty() {
                Error::EmptyTrajectory
            } else {
                Error::InvalidInput("trajectory records no accuracy".into())
            }
        })?;
    flops_to_reference_accuracy(traj, target_fraction * final_acc, target_fraction)
}

/// Like [`flops_to_accuracy`] with an explicit accuracy threshold
/// `target_fraction * reference` replaced by `threshold`.
fn flops_to_reference_accuracy(traj: &Trajectory, threshold: f64, target_fraction: f64) -> Result<Option<u64>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "target fraction must be in (0, 1], got {target_fraction}"
        )));
    }
    Ok(traj
        .points
        .iter()
        .find(|p| p.accuracy.is_some_and(|a| a >= threshold))
        .and_then(|p| p.cum_macs))
}

/// Cumulative MACs at the first record with accuracy at least
/// `target_fraction * reference_accuracy`.
pub fn flops_to_accuracy_of(traj: &Trajectory, target_fraction: f64, reference_accuracy: f64) -> Result<Option<u64>> {
    flops_to_reference_accuracy(traj, target_fraction * reference_accuracy, target_fraction)
}
