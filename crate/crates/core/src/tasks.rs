//! Synthetic datasets: a rank-`d` linear regression task and Gaussian-blob
//! classification with a controllable number of classes.
//!
//! Samples are stored as columns throughout (`inputs` is `n x p`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dump, svd, Matrix, Rng};

// Stream ids keep each ingredient independent of the others, so e.g.
// changing `p` or `noise_std` never changes the ground-truth map.
const STREAM_MAP: u64 = 1;
const STREAM_INPUTS: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_MEANS: u64 = 4;
const STREAM_SAMPLES: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTaskSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub p: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Transform the drawn inputs so their sample covariance is exactly
    /// the identity. Needs `p >= n`.
    #[serde(default)]
    pub whiten: bool,
}

impl LinearTaskSpec {
    pub fn new(n: usize, m: usize, d: usize, p: usize, noise_std: f64, seed: u64) -> Self {
        LinearTaskSpec {
            n,
            m,
            d,
            p,
            noise_std,
            seed,
            whiten: false,
        }
    }

    pub fn whitened(mut self) -> Self {
        self.whiten = true;
        self
    }
}

/// Regression task `y = A x + noise` with `A` of rank `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTask {
    pub spec: LinearTaskSpec,
    /// Ground-truth map, `m x n`.
    pub a: Matrix,
    /// `n x p`.
    pub inputs: Matrix,
    /// `m x p`.
    pub targets: Matrix,
}

/// Draws `A = sum_j u_j v_j^T` from `d` pairs of standard normal vectors,
/// standard normal inputs (optionally whitened exactly), and targets with
/// additive i.i.d. normal noise.
pub fn make_linear_task(spec: &LinearTaskSpec) -> Result<LinearTask> {
    let LinearTaskSpec {
        n,
        m,
        d,
        p,
        noise_std,
        seed,
        whiten,
    } = *spec;
    if d > n.min(m) {
        return Err(Error::InvalidRank(format!(
            "task rank d = {d} exceeds min(n, m) = {}",
            n.min(m)
        )));
    }
    if p == 0 || n == 0 || m == 0 {
        return Err(Error::InvalidInput("n, m and p must be at least 1".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidInput(format!("noise_std must be >= 0, got {noise_std}")));
    }
    if whiten && p < n {
        return Err(Error::InvalidInput(format!(
            "exact whitening needs p >= n, got p = {p}, n = {n}"
        )));
    }

    let mut map_rng = Rng::with_stream(seed, STREAM_MAP);
    let left = map_rng.gaussian_matrix(m, d, 1.0);
    let right = map_rng.gaussian_matrix(n, d, 1.0);
    let a = left.matmul_t(&right);

    let mut inputs = Rng::with_stream(seed, STREAM_INPUTS).gaussian_matrix(n, p, 1.0);
    if whiten {
        inputs = whiten_columns(&inputs)?;
    }
    let noise = Rng::with_stream(seed, STREAM_NOISE).gaussian_matrix(m, p, noise_std);
    let targets = a.matmul(&inputs).add(&noise);
    Ok(LinearTask {
        spec: spec.clone(),
        a,
        inputs,
        targets,
    })
}

/// Left-multiply by `Sigma^{-1/2}` where `Sigma = X X^T / p`.
fn whiten_columns(x: &Matrix) -> Result<Matrix> {
    let p = x.cols() as f64;
    let cov = x.matmul_t(x).scale(1.0 / p);
    let t = svd(&cov)?;
    let smallest = t.s.last().copied().unwrap_or(0.0);
    if smallest <= t.s[0] * 1e-12 {
        return Err(Error::InvalidInput("input covariance is singular; cannot whiten".into()));
    }
    // Symmetric PSD: left and right singular vectors coincide.
    let scaled = Matrix::from_fn(t.u.rows(), t.u.cols(), |i, j| t.u.get(i, j) / t.s[j].sqrt());
    let inv_sqrt = scaled.matmul_t(&t.u);
    Ok(inv_sqrt.matmul(x))
}

impl LinearTask {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    /// `Sigma_io = Y X^T / p`, `m x n`.
    pub fn input_output_covariance(&self) -> Matrix {
        input_output_covariance(self)
    }

    /// `Sigma_ii = X X^T / p`, `n x n`.
    pub fn input_covariance(&self) -> Matrix {
        self.inputs.matmul_t(&self.inputs).scale(1.0 / self.p() as f64)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = TaskMeta::Linear {
            spec: self.spec.clone(),
        };
        write_json(&dir.join("task.json"), &meta)?;
        dump::write(&dir.join("a.txt"), &self.a)?;
        dump::write(&dir.join("inputs.txt"), &self.inputs)?;
        dump::write(&dir.join("targets.txt"), &self.targets)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("task.json");
        let TaskMeta::Linear { spec } = read_json(&path)? else {
            return Err(Error::parse(path, "not a linear task"));
        };
        Ok(LinearTask {
            spec,
            a: dump::read(&dir.join("a.txt"))?,
            inputs: dump::read(&dir.join("inputs.txt"))?,
            targets: dump::read(&dir.join("targets.txt"))?,
        })
    }
}

/// `(1/p) * targets * inputs^T`.
pub fn input_output_covariance(task: &LinearTask) -> Matrix {
    task.targets
        .matmul_t(&task.inputs)
        .scale(1.0 / task.p() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTaskSpec {
    pub n: usize,
    /// Number of classes, which is also the output width.
    pub d: usize,
    pub per_class: usize,
    /// Within-class standard deviation per coordinate, before normalization.
    pub spread: f64,
    pub seed: u64,
    /// Rescale all inputs by one constant so the training inputs have unit
    /// root-mean-square entry.
    #[serde(default)]
    pub normalize: bool,
}

impl ClassTaskSpec {
    pub fn new(n: usize, d: usize, per_class: usize, spread: f64, seed: u64) -> Self {
        ClassTaskSpec {
            n,
            d,
            per_class,
            spread,
            seed,
            normalize: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize = true;
        self
    }
}

/// Gaussian blobs around `d` random class means.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassTask {
    pub spec: ClassTaskSpec,
    /// `n x p`, classes interleaved: sample `i` belongs to class `i % d`.
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    /// `n x d`, in the same units as `inputs`.
    pub class_means: Matrix,
    /// Factor applied to raw draws (1 unless `normalize`).
    pub scale: f64,
}

pub fn make_class_task(spec: &ClassTaskSpec) -> Result<ClassTask> {
    let ClassTaskSpec {
        n,
        d,
        per_class,
        spread,
        seed,
        normalize,
    } = *spec;
    if d < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 classes, got {d}")));
    }
    if per_class == 0 || n == 0 {
        return Err(Error::InvalidInput("n and per_class must be at least 1".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidInput(format!("spread must be >= 0, got {spread}")));
    }
    let means = Rng::with_stream(seed, STREAM_MEANS).gaussian_matrix(n, d, 1.0);
    let min_gap = min_pairwise_distance(&means);
    if min_gap <= 2.0 * spread {
        return Err(Error::InvalidInput(format!(
            "class means too close for spread {spread}: closest pair at distance {min_gap:.3}"
        )));
    }
    let mut rng = Rng::with_stream(seed, STREAM_SAMPLES);
    let (raw, labels) = draw_blobs(&means, per_class, spread, &mut rng);
    let scale = if normalize {
        let rms = (raw.data().iter().map(|v| v * v).sum::<f64>() / raw.data().len() as f64).sqrt();
        if rms > 0.0 {
            1.0 / rms
        } else {
            1.0
        }
    } else {
        1.0
    };
    Ok(ClassTask {
        spec: spec.clone(),
        inputs: raw.scale(scale),
        labels,
        class_means: means.scale(scale),
        scale,
    })
}

fn min_pairwise_distance(means: &Matrix) -> f64 {
    let d = means.cols();
    let mut best = f64::INFINITY;
    for a in 0..d {
        for b in (a + 1)..d {
            let dist = (0..means.rows())
                .map(|i| (means.get(i, a) - means.get(i, b)).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(dist);
        }
    }
    best
}

fn draw_blobs(means: &Matrix, per_class: usize, spread: f64, rng: &mut Rng) -> (Matrix, Vec<usize>) {
    let (n, d) = means.shape();
    let p = per_class * d;
    let labels: Vec<usize> = (0..p).map(|i| i % d).collect();
    let mut x = Matrix::zeros(n, p);
    for (j, &c) in labels.iter().enumerate() {
        for i in 0..n {
            x.set(i, j, means.get(i, c) + spread * rng.normal());
        }
    }
    (x, labels)
}

impl ClassTask {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    /// One-hot targets for the training labels, `d x p`.
    pub fn one_hot(&self) -> Matrix {
        one_hot(&self.labels, self.d())
    }

    /// Fresh draws from the same class distributions (for held-out
    /// evaluation), independent of the training samples.
    pub fn resample(&self, per_class: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let raw_means = self.class_means.scale(1.0 / self.scale);
        let mut rng = Rng::with_stream(seed, STREAM_SAMPLES ^ 0x5eed_0000);
        let (x, labels) = draw_blobs(&raw_means, per_class, self.spec.spread, &mut rng);
        (x.scale(self.scale), labels)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = TaskMeta::Class {
            spec: self.spec.clone(),
            scale: self.scale,
        };
        write_json(&dir.join("task.json"), &meta)?;
        dump::write(&dir.join("inputs.txt"), &self.inputs)?;
        dump::write(&dir.join("class_means.txt"), &self.class_means)?;
        let labels: String = self.labels.iter().map(|l| format!("{l}\n")).collect();
        let path = dir.join("labels.txt");
        fs::write(&path, labels).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("task.json");
        let TaskMeta::Class { spec, scale } = read_json(&path)? else {
            return Err(Error::parse(path, "not a classification task"));
        };
        let inputs = dump::read(&dir.join("inputs.txt"))?;
        let class_means = dump::read(&dir.join("class_means.txt"))?;
        let lpath = dir.join("labels.txt");
        let text = fs::read_to_string(&lpath).map_err(|e| Error::io(&lpath, e))?;
        let labels = text
            .lines()
            .map(|l| l.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(&lpath, e.to_string()))?;
        Ok(ClassTask {
            spec,
            inputs,
            labels,
            class_means,
            scale,
        })
    }
}

/// `d x labels.len()` indicator matrix.
pub fn one_hot(labels: &[usize], d: usize) -> Matrix {
    let mut y = Matrix::zeros(d, labels.len());
    for (j, &c) in labels.iter().enumerate() {
        y.set(c, j, 1.0);
    }
    y
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TaskMeta {
    Linear { spec: LinearTaskSpec },
    Class { spec: ClassTaskSpec, scale: f64 },
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("task metadata serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}
