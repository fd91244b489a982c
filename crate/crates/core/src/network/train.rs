use log::debug;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackHyper, PathwayState};
use crate::linalg::{macs, svd, Matrix, Rng, SvdTriple};
use crate::metrics::subspace_alignment;
use crate::tasks::{ClassTask, LinearTask};
use crate::theory::mode_overlaps_of_map;
use crate::trajectory::{Trajectory, TrajectoryPoint};

// Epoch streams start here so they never meet the small fixed stream ids
// used for initialization.
const STREAM_BATCHES: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Forward learning rate `η = dt / τ`.
    pub eta: f64,
    /// Forward weight decay.
    pub lambda: f64,
    /// Minibatch size; 0 means the full training set every step.
    pub batch: usize,
    pub steps: usize,
    /// Seeds the minibatch order.
    pub seed: u64,
    pub feedback: FeedbackHyper,
    pub record_every: usize,
    /// Forward time constant; recorded time is `step * eta * tau`.
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.01,
            lambda: 0.0,
            batch: 0,
            steps: 1000,
            seed: 0,
            feedback: FeedbackHyper::default(),
            record_every: 10,
            tau: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be >= 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidInput("tau must be > 0".into()));
        }
        self.feedback.validate()
    }
}

/// Training data with whatever ground truth the diagnostics can use.
#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a> {
    Linear(&'a LinearTask),
    Class {
        task: &'a ClassTask,
        /// Held-out inputs and labels for accuracy; the training set is
        /// used when absent.
        eval: Option<(&'a Matrix, &'a [usize])>,
    },
}

struct Prepared<'a> {
    inputs: &'a Matrix,
    targets: Matrix,
    labels: Option<&'a [usize]>,
    eval: Option<(&'a Matrix, &'a [usize])>,
    /// Decomposition of `Σ_io` and the number of tracked modes.
    linear: Option<(SvdTriple, usize)>,
}

fn prepare<'a>(data: TrainData<'a>) -> Result<Prepared<'a>> {
    Ok(match data {
        TrainData::Linear(task) => Prepared {
            inputs: &task.inputs,
            targets: task.targets.clone(),
            labels: None,
            eval: None,
            linear: Some((svd(&task.input_output_covariance())?, task.d())),
        },
        TrainData::Class { task, eval } => Prepared {
            inputs: &task.inputs,
            targets: task.one_hot(),
            labels: Some(&task.labels),
            eval,
            linear: None,
        },
    })
}

/// Minibatch column indices. Epoch `e` visits the samples in an order
/// drawn from its own stream, so the batch at any step is a pure function
/// of the seed and the number of samples consumed, which lets a resumed
/// run continue the same sequence.
struct Batcher {
    seed: u64,
    p: usize,
    size: usize,
    epoch: Option<u64>,
    order: Vec<usize>,
}

impl Batcher {
    fn new(seed: u64, p: usize, size: usize) -> Self {
        Batcher {
            seed,
            p,
            size,
            epoch: None,
            order: Vec::new(),
        }
    }

    fn batch_at(&mut self, step: usize) -> Vec<usize> {
        let start = step as u64 * self.size as u64;
        (0..self.size as u64)
            .map(|k| {
                let n = start + k;
                let epoch = n / self.p as u64;
                if self.epoch != Some(epoch) {
                    let mut rng = Rng::with_stream(self.seed, STREAM_BATCHES + epoch);
                    self.order = (0..self.p).collect();
                    rng.shuffle(&mut self.order);
                    self.epoch = Some(epoch);
                }
                self.order[(n % self.p as u64) as usize]
            })
            .collect()
    }
}

/// Where a resumed run picks up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resume {
    /// Updates already applied.
    pub step: usize,
    pub cum_macs: u64,
}

/// Runs `cfg.steps` updates of forward weights and feedback factors,
/// recording diagnostics every `cfg.record_every` steps and at the end.
///
/// Feedback factors update on steps divisible by the update interval,
/// from the same forward pass and before the forward weights move.
pub fn train(net: &mut Network, data: TrainData<'_>, cfg: &TrainConfig) -> Result<Trajectory> {
    train_from(net, data, cfg, Resume::default())
}

/// Continues a run that has already applied `resume.step` updates. The
/// returned trajectory starts with a record of the resumed state.
pub fn train_from(net: &mut Network, data: TrainData<'_>, cfg: &TrainConfig, resume: Resume) -> Result<Trajectory> {
    cfg.validate()?;
    let prep = prepare(data)?;
    let p = prep.inputs.cols();
    if prep.inputs.rows() != net.widths()[0] || prep.targets.rows() != *net.widths().last().unwrap() {
        return Err(Error::Dimension(format!(
            "task is {} -> {} but network is {:?}",
            prep.inputs.rows(),
            prep.targets.rows(),
            net.widths()
        )));
    }
    let full_batch = cfg.batch == 0 || cfg.batch >= p;
    let mut batcher = Batcher::new(cfg.seed, p, cfg.batch.min(p));

    let lambda_count = match &prep.linear {
        Some((_, d)) if net.is_linear() => *d,
        _ => 0,
    };
    let mut traj = Trajectory {
        points: Vec::new(),
        lambda_count,
    };
    let mut cum_macs = resume.cum_macs;
    traj.points.push(record(net, &prep, cfg, resume.step, cum_macs)?);

    for step in resume.step..cfg.steps {
        let picked;
        let (x, y) = if full_batch {
            (prep.inputs, &prep.targets)
        } else {
            let idx = batcher.batch_at(step);
            picked = (prep.inputs.select_columns(&idx), prep.targets.select_columns(&idx));
            (&picked.0, &picked.1)
        };
        let update_feedback = step % cfg.feedback.update_interval == 0;
        let (outcome, spent) = macs::measure(|| train_step(net, x, y, cfg, update_feedback));
        cum_macs += spent;
        let batch_loss = outcome?;
        let done = step + 1;
        if !batch_loss.is_finite() || net.layers.iter().any(|l| !l.w.is_finite()) {
            return Err(Error::Divergence {
                step: done,
                detail: format!("batch loss {batch_loss}"),
            });
        }
        if done % cfg.record_every == 0 || done == cfg.steps {
            let point = record(net, &prep, cfg, done, cum_macs)?;
            if !point.loss.is_finite() {
                return Err(Error::Divergence {
                    step: done,
                    detail: format!("training loss {}", point.loss),
                });
            }
            debug!("step {done}: loss {}", point.loss);
            traj.points.push(point);
        }
    }
    Ok(traj)
}

/// One forward/backward pass plus updates; returns the batch loss seen by
/// the forward pass.
fn train_step(net: &mut Network, x: &Matrix, y: &Matrix, cfg: &TrainConfig, update_feedback: bool) -> Result<f64> {
    let cache = net.forward(x)?;
    let loss = net.loss.value(cache.output(), y);
    let deltas = net.backward(&cache, y)?;
    if update_feedback {
        let Network { layers, pathways, .. } = net;
        for (idx, slot) in pathways.iter_mut().enumerate() {
            let Some(pw) = slot else { continue };
            let layer = idx + 1;
            match pw.state {
                PathwayState::Normative { .. } => {
                    pw.update_normative(&layers[layer].w, &cfg.feedback)?;
                }
                PathwayState::Local { .. } => {
                    let src = &deltas[pw.source_layer - 1];
                    pw.update_local(src, &cache.post[layer], Some(y), &cfg.feedback)?;
                }
                _ => {}
            }
        }
    }
    net.apply_updates(&cache, &deltas, cfg.eta, cfg.lambda)?;
    Ok(loss)
}

fn record(net: &Network, prep: &Prepared<'_>, cfg: &TrainConfig, step: usize, cum_macs: u64) -> Result<TrajectoryPoint> {
    let loss = net.evaluate_loss(prep.inputs, &prep.targets)?;
    let accuracy = match (prep.eval, prep.labels) {
        (Some((x, labels)), _) => Some(net.accuracy(x, labels)?),
        (None, Some(labels)) => Some(net.accuracy(prep.inputs, labels)?),
        _ => None,
    };
    let depth = net.depth();
    let mut lambdas = None;
    let mut angle: Option<f64> = None;
    if let Some((t, d)) = &prep.linear {
        if net.is_linear() {
            lambdas = Some(mode_overlaps_of_map(&net.end_to_end_map(), t, *d).values);
        }
        for pw in net.pathways.iter().flatten() {
            if pw.source_layer != depth {
                continue;
            }
            if let Some((_, pm)) = pw.factors() {
                let k = pm.rows().min(t.u.cols());
                let a = subspace_alignment(pm, &t.u.column_range(0, k))?.max_angle();
                angle = Some(angle.map_or(a, |m| m.max(a)));
            }
        }
    }
    let pp_orth_err = net
        .pathways
        .iter()
        .flatten()
        .filter_map(|pw| pw.orthonormality_error())
        .reduce(f64::max);
    Ok(TrajectoryPoint {
        step,
        time: step as f64 * cfg.eta * cfg.tau,
        loss,
        accuracy,
        lambdas,
        pp_orth_err,
        subspace_angle_max: angle,
        cum_macs: Some(cum_macs),
    })
}
