//! Multilayer perceptron with a forward pass and a decoupled backward pass.
//!
//! Units are indexed `0..=L`: `h_0` is the input and `h_L` the output.
//! `layers[i]` holds `W_{i+1}` (`n_{i+1} x n_i`), so `a_{l} = W_l h_{l-1}`
//! and `h_l = f(a_l)`. Hidden layer `l` (`1 <= l < L`) receives its error
//! through `pathways[l - 1]`.
//!
//! Sign convention: every `delta` is the *negative* gradient of the
//! batch-averaged loss with respect to the preactivation, so
//! `W_l += eta * delta_l h_{l-1}^T` descends. For squared error,
//! `delta_L = (y - ŷ) ⊙ f'(a_L) / batch`.

mod activation;
mod train;

use serde::{Deserialize, Serialize};

pub use activation::Activation;
pub use train::{train, train_from, Resume, TrainConfig, TrainData};

use crate::error::{Error, Result};
use crate::feedback::{FeedbackPathway, LocalRule, PathwayKind, PathwayState};
use crate::linalg::{Matrix, Rng};

/// Output loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `½ Σ ‖y − ŷ‖² / batch`.
    #[default]
    SquaredError,
    /// Softmax over the output followed by cross-entropy, averaged over
    /// the batch.
    CrossEntropySoftmax,
}

impl Loss {
    pub fn value(self, output: &Matrix, target: &Matrix) -> f64 {
        let batch = output.cols().max(1) as f64;
        match self {
            Loss::SquaredError => 0.5 * output.sub(target).data().iter().map(|v| v * v).sum::<f64>() / batch,
            Loss::CrossEntropySoftmax => {
                let mut total = 0.0;
                for j in 0..output.cols() {
                    let col = output.col(j);
                    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let log_z = max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    for (i, v) in col.iter().enumerate() {
                        total -= target.get(i, j) * (v - log_z);
                    }
                }
                total / batch
            }
        }
    }

    /// Negative gradient of the batch-averaged loss with respect to the
    /// output activity `ŷ`.
    fn output_error(self, output: &Matrix, target: &Matrix) -> Matrix {
        let batch = output.cols().max(1) as f64;
        match self {
            Loss::SquaredError => target.sub(output).scale(1.0 / batch),
            Loss::CrossEntropySoftmax => {
                let probs = softmax_columns(output);
                target.sub(&probs).scale(1.0 / batch)
            }
        }
    }
}

fn softmax_columns(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for j in 0..x.cols() {
        let col = x.col(j);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = col.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (i, e) in exps.iter().enumerate() {
            out.set(i, j, e / z);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    /// One entry per hidden layer; `None` leaves that layer without a
    /// teaching signal (its error is zero).
    pub pathways: Vec<Option<FeedbackPathway>>,
    pub loss: Loss,
}

/// Activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `a_1 ..= a_L`.
    pub pre: Vec<Matrix>,
    /// `h_0 ..= h_L`.
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache holds the input at least")
    }
}

/// How forward weights are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum WeightInit {
    /// I.i.d. normal entries with the given standard deviation.
    Gaussian { std: f64 },
    /// Kaiming-uniform (bound `sqrt(6 / fan_in)`) times `gain`.
    KaimingUniform { gain: f64 },
}

/// Recipe for one hidden layer's pathway.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwaySpec {
    pub kind: PathwayKind,
    /// Required for factored kinds. For fixed random feedback it makes `B`
    /// a frozen product of rank `rank`; without it `B` is dense.
    pub rank: Option<usize>,
    /// Defaults to the next layer.
    pub source_layer: Option<usize>,
    pub rule: LocalRule,
}

impl PathwaySpec {
    pub fn chained(kind: PathwayKind, rank: Option<usize>) -> Self {
        PathwaySpec {
            kind,
            rank,
            source_layer: None,
            rule: LocalRule::default(),
        }
    }
}

// Stream ids: forward weights and feedback parameters draw from separate
// streams so swapping pathway kinds keeps the forward initialization.
const STREAM_WEIGHTS: u64 = 10;
const STREAM_PATHWAYS: u64 = 11;

impl Network {
    /// Validates dimension chains and pathway placement.
    pub fn new(layers: Vec<Layer>, pathways: Vec<Option<FeedbackPathway>>, loss: Loss) -> Result<Self> {
        let net = Network { layers, pathways, loss };
        net.validate()?;
        Ok(net)
    }

    /// Builds a network with `widths = [n_0, ..., n_L]`, one activation per
    /// weight layer and one pathway spec per hidden layer.
    pub fn build(
        widths: &[usize],
        activations: &[Activation],
        pathways: &[PathwaySpec],
        loss: Loss,
        init: WeightInit,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidInput("need at least input and output widths".into()));
        }
        let depth = widths.len() - 1;
        if activations.len() != depth {
            return Err(Error::InvalidInput(format!(
                "{depth} weight layers but {} activations",
                activations.len()
            )));
        }
        if pathways.len() != depth - 1 {
            return Err(Error::InvalidInput(format!(
                "{} hidden layers but {} pathway specs",
                depth - 1,
                pathways.len()
            )));
        }
        let mut wrng = Rng::with_stream(seed, STREAM_WEIGHTS);
        let layers = (0..depth)
            .map(|i| {
                let (rows, cols) = (widths[i + 1], widths[i]);
                let w = match init {
                    WeightInit::Gaussian { std } => wrng.gaussian_matrix(rows, cols, std),
                    WeightInit::KaimingUniform { gain } => {
                        crate::feedback::kaiming_uniform(&mut wrng, rows, cols, cols).scale(gain)
                    }
                };
                Layer {
                    w,
                    activation: activations[i],
                }
            })
            .collect();
        let mut prng = Rng::with_stream(seed, STREAM_PATHWAYS);
        let mut built = Vec::with_capacity(pathways.len());
        for (idx, spec) in pathways.iter().enumerate() {
            let layer = idx + 1;
            let source = spec.source_layer.unwrap_or(layer + 1);
            if source <= layer || source > depth {
                return Err(Error::InvalidInput(format!(
                    "pathway of layer {layer} reads from layer {source}; it must be in {}..={depth}",
                    layer + 1
                )));
            }
            let (n_layer, n_src) = (widths[layer], widths[source]);
            let rank = || {
                spec.rank
                    .ok_or_else(|| Error::InvalidRank(format!("layer {layer}: factored pathway needs a rank")))
            };
            let pw = match spec.kind {
                PathwayKind::Transpose => FeedbackPathway::transpose(source),
                PathwayKind::FixedRandom => match spec.rank {
                    None => FeedbackPathway::fixed_random(n_layer, n_src, source, &mut prng),
                    Some(r) => FeedbackPathway::fixed_random_low_rank(n_layer, n_src, r, source, &mut prng)?,
                },
                PathwayKind::FactoredNormative => {
                    FeedbackPathway::normative(n_layer, n_src, rank()?, source, &mut prng)?
                }
                PathwayKind::FactoredLocal => {
                    FeedbackPathway::local(n_layer, n_src, rank()?, source, spec.rule, &mut prng)?
                }
            };
            built.push(Some(pw));
        }
        Network::new(layers, built, loss)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `[n_0, ..., n_L]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers.first().map_or(0, |l| l.w.cols())];
        w.extend(self.layers.iter().map(|l| l.w.rows()));
        w
    }

    /// True when every layer is linear, so the network is a single map.
    pub fn is_linear(&self) -> bool {
        self.layers.iter().all(|l| l.activation == Activation::Linear)
    }

    /// Product `W_L ... W_1`.
    pub fn end_to_end_map(&self) -> Matrix {
        let mut m = self.layers[0].w.clone();
        for layer in &self.layers[1..] {
            m = layer.w.matmul(&m);
        }
        m
    }

    fn validate(&self) -> Result<()> {
        let depth = self.layers.len();
        if depth == 0 {
            return Err(Error::InvalidInput("network has no layers".into()));
        }
        for i in 1..depth {
            let (prev, next) = (&self.layers[i - 1].w, &self.layers[i].w);
            if next.cols() != prev.rows() {
                return Err(Error::Dimension(format!(
                    "layer {} outputs {} units but layer {} takes {}",
                    i,
                    prev.rows(),
                    i + 1,
                    next.cols()
                )));
            }
        }
        if self.pathways.len() != depth - 1 {
            return Err(Error::InvalidInput(format!(
                "{} hidden layers but {} pathways",
                depth - 1,
                self.pathways.len()
            )));
        }
        let widths = self.widths();
        for (idx, pw) in self.pathways.iter().enumerate() {
            let Some(pw) = pw else { continue };
            let layer = idx + 1;
            let src = pw.source_layer;
            if src <= layer || src > depth {
                return Err(Error::InvalidInput(format!(
                    "pathway of layer {layer} reads from layer {src}; it must be in {}..={depth}",
                    layer + 1
                )));
            }
            if let Some(shape) = pw.stored_shape() {
                if shape != (widths[layer], widths[src]) {
                    return Err(Error::Dimension(format!(
                        "pathway of layer {layer} is {}x{}, expected {}x{}",
                        shape.0, shape.1, widths[layer], widths[src]
                    )));
                }
            }
            let chained_only = matches!(pw.state, PathwayState::Transpose | PathwayState::Normative { .. });
            if chained_only && src != layer + 1 {
                return Err(Error::InvalidInput(format!(
                    "{:?} pathway of layer {layer} must read from layer {}, not {src}",
                    pw.kind(),
                    layer + 1
                )));
            }
            if let Some(rule) = pw.local_rule() {
                if rule.use_targets && src != depth {
                    return Err(Error::InvalidInput(format!(
                        "pathway of layer {layer} uses targets but its source is layer {src}, not the output"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        let n0 = self.layers[0].w.cols();
        if x.rows() != n0 {
            return Err(Error::Dimension(format!("input has {} rows, network expects {n0}", x.rows())));
        }
        let mut pre = Vec::with_capacity(self.depth());
        let mut post = Vec::with_capacity(self.depth() + 1);
        post.push(x.clone());
        for layer in &self.layers {
            let a = layer.w.matmul(post.last().unwrap());
            post.push(layer.activation.apply(&a));
            pre.push(a);
        }
        Ok(ForwardCache { pre, post })
    }

    /// Output-layer error `delta_L`.
    pub fn output_delta(&self, cache: &ForwardCache, target: &Matrix) -> Result<Matrix> {
        let out = cache.output();
        if target.shape() != out.shape() {
            return Err(Error::Dimension(format!(
                "target is {}x{}, output is {}x{}",
                target.rows(),
                target.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let last = self.layers.last().unwrap();
        let err = self.loss.output_error(out, target);
        Ok(match last.activation {
            Activation::Linear => err,
            act => err.hadamard(&act.derivative_of(cache.pre.last().unwrap())),
        })
    }

    /// Errors `delta_1 ..= delta_L` (index `l - 1` holds `delta_l`).
    ///
    /// Each hidden error comes from its own pathway applied to the error of
    /// that pathway's source layer; a broadcast pathway therefore depends
    /// only on the source error and not on intermediate pathways.
    pub fn backward(&self, cache: &ForwardCache, target: &Matrix) -> Result<Vec<Matrix>> {
        let depth = self.depth();
        if cache.pre.len() != depth || cache.post.len() != depth + 1 {
            return Err(Error::Dimension("forward cache does not match this network".into()));
        }
        let mut deltas: Vec<Option<Matrix>> = vec![None; depth];
        deltas[depth - 1] = Some(self.output_delta(cache, target)?);
        for layer in (1..depth).rev() {
            let a = &cache.pre[layer - 1];
            let delta = match &self.pathways[layer - 1] {
                None => Matrix::zeros(a.rows(), a.cols()),
                Some(pw) => {
                    let src = deltas[pw.source_layer - 1]
                        .as_ref()
                        .expect("source layers are downstream and already computed");
                    let deriv = self.layers[layer - 1].activation.derivative_of(a);
                    let forward_w = match pw.state {
                        PathwayState::Transpose => Some(&self.layers[layer].w),
                        _ => None,
                    };
                    pw.propagate_error(src, &deriv, forward_w)?
                }
            };
            deltas[layer - 1] = Some(delta);
        }
        Ok(deltas.into_iter().map(|d| d.expect("all layers filled")).collect())
    }

    /// `W_l += eta * delta_l h_{l-1}^T - eta * lambda * W_l`.
    pub fn apply_updates(&mut self, cache: &ForwardCache, deltas: &[Matrix], eta: f64, lambda: f64) -> Result<()> {
        if deltas.len() != self.depth() {
            return Err(Error::Dimension(format!(
                "{} deltas for {} layers",
                deltas.len(),
                self.depth()
            )));
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let grad = deltas[l].matmul_t(&cache.post[l]);
            if grad.shape() != layer.w.shape() {
                return Err(Error::Dimension(format!("update for layer {} has the wrong shape", l + 1)));
            }
            if lambda != 0.0 {
                layer.w.scale_in_place(1.0 - eta * lambda);
            }
            layer.w.axpy(eta, &grad);
        }
        Ok(())
    }

    /// Loss of the network on a dataset.
    pub fn evaluate_loss(&self, x: &Matrix, target: &Matrix) -> Result<f64> {
        let cache = self.forward(x)?;
        Ok(self.loss.value(cache.output(), target))
    }

    /// Fraction of columns whose largest output matches the label.
    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let cache = self.forward(x)?;
        let out = cache.output();
        if labels.len() != out.cols() {
            return Err(Error::Dimension(format!("{} labels for {} samples", labels.len(), out.cols())));
        }
        let hits = labels
            .iter()
            .enumerate()
            .filter(|&(j, &label)| argmax_column(out, j) == label)
            .count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }
}

fn argmax_column(m: &Matrix, j: usize) -> usize {
    let mut best = 0;
    for i in 1..m.rows() {
        if m.get(i, j) > m.get(best, j) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_net(ws: Vec<Matrix>) -> Network {
        let depth = ws.len();
        let layers = ws
            .into_iter()
            .map(|w| Layer {
                w,
                activation: Activation::Linear,
            })
            .collect();
        let pathways = (1..depth).map(|l| Some(FeedbackPathway::transpose(l + 1))).collect();
        Network::new(layers, pathways, Loss::SquaredError).unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = linear_net(vec![Matrix::identity(3)]);
        let x = Rng::new(1).gaussian_matrix(3, 4, 1.0);
        assert_eq!(net.forward(&x).unwrap().output(), &x);
    }

    #[test]
    fn two_linear_layers_compose() {
        let mut rng = Rng::new(2);
        let (w1, w2) = (rng.gaussian_matrix(5, 4, 1.0), rng.gaussian_matrix(3, 5, 1.0));
        let x = rng.gaussian_matrix(4, 6, 1.0);
        let net = linear_net(vec![w1.clone(), w2.clone()]);
        let direct = w2.matmul(&w1).matmul(&x);
        assert!(net.forward(&x).unwrap().output().max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn relu_net_on_zero_input_is_silent() {
        let net = Network::build(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Relu],
            &[PathwaySpec::chained(PathwayKind::Transpose, None)],
            Loss::SquaredError,
            WeightInit::KaimingUniform { gain: 1.0 },
            0,
        )
        .unwrap();
        let cache = net.forward(&Matrix::zeros(3, 2)).unwrap();
        assert!(cache.post[1..].iter().all(|h| h.max_abs() == 0.0));
    }

    #[test]
    fn zero_deltas_only_decay() {
        let mut net = linear_net(vec![Rng::new(3).gaussian_matrix(2, 2, 1.0)]);
        let w0 = net.layers[0].w.clone();
        let cache = net.forward(&Matrix::identity(2)).unwrap();
        net.apply_updates(&cache, &[Matrix::zeros(2, 2)], 0.1, 0.5).unwrap();
        assert!(net.layers[0].w.max_abs_diff(&w0.scale(0.95)) < 1e-15);
    }

    #[test]
    fn no_op_update_is_bit_identical() {
        let mut net = linear_net(vec![Rng::new(3).gaussian_matrix(2, 3, 1.0)]);
        let before = net.clone();
        let x = Rng::new(4).gaussian_matrix(3, 5, 1.0);
        let y = Rng::new(5).gaussian_matrix(2, 5, 1.0);
        let cache = net.forward(&x).unwrap();
        let deltas = net.backward(&cache, &y).unwrap();
        net.apply_updates(&cache, &deltas, 0.0, 0.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn broadcast_transpose_rejected() {
        let err = Network::build(
            &[3, 4, 4, 2],
            &[Activation::Linear; 3],
            &[
                PathwaySpec {
                    kind: PathwayKind::Transpose,
                    rank: None,
                    source_layer: Some(3),
                    rule: LocalRule::default(),
                },
                PathwaySpec::chained(PathwayKind::Transpose, None),
            ],
            Loss::SquaredError,
            WeightInit::Gaussian { std: 0.1 },
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("layer 1"));
    }

    #[test]
    fn softmax_error_sums_to_zero() {
        let out = Matrix::from_rows(&[[1.0], [2.0], [0.5]]).unwrap();
        let y = Matrix::from_rows(&[[0.0], [1.0], [0.0]]).unwrap();
        let e = Loss::CrossEntropySoftmax.output_error(&out, &y);
        assert!(e.sum().abs() < 1e-15);
    }
}
