//! Experiment configuration: a TOML file read against a strict schema.
//!
//! Parsing never stops at the first problem. Unknown keys, wrong types,
//! missing fields and inconsistent dimensions are all collected and
//! reported together.

use std::fs;
use std::path::{Path, PathBuf};

use ldfa_core::feedback::{FeedbackHyper, LocalRule, PathwayKind};
use ldfa_core::network::{Activation, Loss, PathwaySpec, TrainConfig, WeightInit};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    LinearSim,
    LinearTheory,
    MlpTrain,
    RankSweep,
    FlopsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskConfig {
    Linear {
        n: usize,
        m: usize,
        d: usize,
        p: usize,
        noise_std: f64,
        whiten: bool,
    },
    Class {
        n: usize,
        d: usize,
        per_class: usize,
        spread: f64,
        normalize: bool,
        /// Held-out samples per class for accuracy; 0 scores the training set.
        eval_per_class: usize,
    },
}

impl TaskConfig {
    fn dims(&self) -> (usize, usize) {
        match *self {
            TaskConfig::Linear { n, m, .. } => (n, m),
            TaskConfig::Class { n, d, .. } => (n, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub loss: Loss,
    pub init: WeightInit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathwayConfig {
    pub kind: PathwayKind,
    pub rank: Option<usize>,
    pub source_layer: Option<usize>,
    pub update_q: bool,
    pub use_targets: bool,
    pub raw_oja: bool,
}

impl PathwayConfig {
    pub fn spec(&self) -> PathwaySpec {
        PathwaySpec {
            kind: self.kind,
            rank: self.rank,
            source_layer: self.source_layer,
            rule: LocalRule {
                update_q: self.update_q,
                use_targets: self.use_targets,
                raw_oja: self.raw_oja,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub eta: f64,
    pub lambda: f64,
    /// 0 trains on the full set every step.
    pub batch: usize,
    pub steps: usize,
    pub record_every: usize,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    /// Integration steps per training step (the step is `eta * tau`).
    pub substeps: usize,
    /// Overlap deviation reported as acceptable in the comparison.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ranks: Vec<usize>,
    /// Adds a transpose-feedback run labelled `full`.
    pub include_full: bool,
    pub target_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsConfig {
    pub batch: usize,
    pub update_interval: usize,
    /// Extra ranks to cost for every factored pathway; empty reports the
    /// configured ranks only.
    pub ranks: Vec<usize>,
}

/// Everything that determines the numbers a run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub kind: Kind,
    pub seed: u64,
    pub repeats: usize,
    pub task: Option<TaskConfig>,
    pub network: NetworkConfig,
    /// One per hidden layer after expansion of a single shared entry.
    pub pathways: Vec<PathwayConfig>,
    pub train: TrainSection,
    pub feedback: FeedbackHyper,
    pub theory: Option<TheoryConfig>,
    pub sweep: Option<SweepConfig>,
    pub flops: Option<FlopsConfig>,
}

impl Experiment {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta: self.train.eta,
            lambda: self.train.lambda,
            batch: self.train.batch,
            steps: self.train.steps,
            seed,
            feedback: self.feedback,
            record_every: self.train.record_every,
            tau: self.train.tau,
        }
    }

    pub fn pathway_specs(&self) -> Vec<PathwaySpec> {
        self.pathways.iter().map(PathwayConfig::spec).collect()
    }

    /// SHA-256 of the canonical JSON form. Formatting, key order and
    /// whether defaults were spelled out do not affect it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub out_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    parse_str(&text, stem)
}

/// Parses config text; `default_name` names the experiment when the file
/// does not.
pub fn parse_str(text: &str, default_name: &str) -> Result<ExperimentConfig, CliError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(vec![format!("not valid TOML: {}", e.message())]))?;
    let mut errs = Vec::new();
    let cfg = read_config(&table, default_name, &mut errs);
    if !errs.is_empty() {
        return Err(CliError::Config(errs));
    }
    let cfg = cfg.expect("no errors means every field was read");
    validate(&cfg.experiment, &mut errs);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errs))
    }
}

/// Field reader for one table that records every problem and remembers
/// which keys it looked at, so leftovers can be reported as unknown.
struct Fields<'a> {
    path: String,
    table: &'a Table,
    seen: Vec<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(path: &str, table: &'a Table) -> Self {
        Fields {
            path: path.to_string(),
            table,
            seen: Vec::new(),
        }
    }

    fn key(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn value(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.get(key)
    }

    fn opt<T>(&mut self, key: &'static str, errs: &mut Vec<String>, conv: fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        let v = self.value(key)?;
        let out = conv(v);
        if out.is_none() {
            errs.push(format!("{}: expected {what}, got {}", self.key(key), describe(v)));
        }
        out
    }

    fn req<T>(&mut self, key: &'static str, errs: &mut Vec<String>, conv: fn(&Value) -> Option<T>, what: &str) -> Option<T> {
        if self.table.contains_key(key) {
            self.opt(key, errs, conv, what)
        } else {
            self.seen.push(key);
            errs.push(format!("{}: missing required {what}", self.key(key)));
            None
        }
    }

    fn usize(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<usize> {
        self.opt(key, errs, as_usize, "a non-negative integer")
    }

    fn req_usize(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<usize> {
        self.req(key, errs, as_usize, "a non-negative integer")
    }

    fn f64(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<f64> {
        self.opt(key, errs, as_f64, "a number")
    }

    fn req_f64(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<f64> {
        self.req(key, errs, as_f64, "a number")
    }

    fn bool(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<bool> {
        self.opt(key, errs, Value::as_bool, "true or false")
    }

    fn str(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<&'a str> {
        let v = self.value(key)?;
        let out = v.as_str();
        if out.is_none() {
            errs.push(format!("{}: expected a string, got {}", self.key(key), describe(v)));
        }
        out
    }

    fn usize_list(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<Vec<usize>> {
        let v = self.value(key)?;
        let out = v.as_array().and_then(|a| a.iter().map(as_usize).collect::<Option<Vec<_>>>());
        if out.is_none() {
            errs.push(format!(
                "{}: expected a list of non-negative integers, got {}",
                self.key(key),
                describe(v)
            ));
        }
        out
    }

    fn table(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<&'a Table> {
        let v = self.value(key)?;
        let out = v.as_table();
        if out.is_none() {
            errs.push(format!("{}: expected a table, got {}", self.key(key), describe(v)));
        }
        out
    }

    /// Parses a named variant of a core enum.
    fn variant<T: DeserializeOwned>(&mut self, key: &'static str, errs: &mut Vec<String>, choices: &str) -> Option<T> {
        let raw = self.str(key, errs)?;
        let parsed = Value::String(raw.to_string()).try_into::<T>().ok();
        if parsed.is_none() {
            errs.push(format!("{}: unknown value \"{raw}\" (expected one of {choices})", self.key(key)));
        }
        parsed
    }

    fn finish(self, errs: &mut Vec<String>) {
        for key in self.table.keys() {
            if !self.seen.contains(&key.as_str()) {
                errs.push(format!("{}: unknown key", self.key(key)));
            }
        }
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn as_u64(v: &Value) -> Option<u64> {
    v.as_integer().and_then(|i| u64::try_from(i).ok())
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("string \"{s}\""),
        Value::Integer(i) => format!("integer {i}"),
        Value::Float(f) => format!("number {f}"),
        Value::Boolean(b) => format!("boolean {b}"),
        Value::Datetime(_) => "a date".into(),
        Value::Array(_) => "a list".into(),
        Value::Table(_) => "a table".into(),
    }
}

const KINDS: &str = "linear-sim, linear-theory, mlp-train, rank-sweep, flops-report";
const PATHWAY_KINDS: &str = "transpose, fixed_random, factored_normative, factored_local";
const ACTIVATIONS: &str = "linear, relu, tanh";
const LOSSES: &str = "squared_error, cross_entropy_softmax";

fn read_config(root: &Table, default_name: &str, errs: &mut Vec<String>) -> Option<ExperimentConfig> {
    let mut top = Fields::new("", root);
    let kind: Option<Kind> = if root.contains_key("kind") {
        top.variant("kind", errs, KINDS)
    } else {
        top.seen.push("kind");
        errs.push(format!("kind: missing required experiment kind ({KINDS})"));
        None
    };
    let name = top.str("name", errs).unwrap_or(default_name).to_string();
    let out_dir = top.str("out_dir", errs).map(PathBuf::from);
    let seed = top.opt("seed", errs, as_u64, "a non-negative integer").unwrap_or(0);
    let repeats = top.usize("repeats", errs).unwrap_or(1);

    let task = top.table("task", errs).and_then(|t| read_task(t, errs));
    let network = match top.table("network", errs) {
        Some(t) => read_network(t, errs),
        None => {
            if !root.contains_key("network") {
                errs.push("network: missing required table".into());
            }
            None
        }
    };
    let depth = network.as_ref().map_or(0, |n: &NetworkConfig| n.widths.len().saturating_sub(1));
    let pathways = read_pathways(&mut top, depth, errs);

    let train = match top.table("train", errs) {
        Some(t) => read_train(t, errs),
        None => read_train(&Table::new(), errs),
    };
    let feedback = match top.table("feedback", errs) {
        Some(t) => read_feedback(t, train.as_ref().map(|t| t.eta), errs),
        None => read_feedback(&Table::new(), train.as_ref().map(|t| t.eta), errs),
    };
    let theory = top.table("theory", errs).and_then(|t| read_theory(t, errs));
    let sweep = top.table("sweep", errs).and_then(|t| read_sweep(t, errs));
    let flops = top.table("flops", errs).and_then(|t| read_flops(t, train.as_ref(), feedback.as_ref(), errs));
    top.finish(errs);

    let kind = kind?;
    let theory = match (kind, theory) {
        (Kind::LinearTheory, None) if !root.contains_key("theory") => Some(TheoryConfig {
            substeps: 1,
            tolerance: 0.05,
        }),
        (_, t) => t,
    };
    let flops = match (kind, flops) {
        (Kind::FlopsReport, None) if !root.contains_key("flops") => {
            let (train, feedback) = (train.as_ref()?, feedback.as_ref()?);
            Some(FlopsConfig {
                batch: train.batch.max(1),
                update_interval: feedback.update_interval,
                ranks: Vec::new(),
            })
        }
        (_, f) => f,
    };
    Some(ExperimentConfig {
        name,
        out_dir,
        experiment: Experiment {
            kind,
            seed,
            repeats,
            task,
            network: network?,
            pathways: pathways?,
            train: train?,
            feedback: feedback?,
            theory,
            sweep,
            flops,
        },
    })
}

fn read_task(t: &Table, errs: &mut Vec<String>) -> Option<TaskConfig> {
    let mut f = Fields::new("task", t);
    let kind = f.str("type", errs);
    let out = match kind {
        Some("linear") => {
            let n = f.req_usize("n", errs);
            let m = f.req_usize("m", errs);
            let d = f.req_usize("d", errs);
            let p = f.usize("p", errs).or(n.map(|n| 100 * n));
            let noise_std = f.f64("noise_std", errs).unwrap_or(1.0);
            let whiten = f.bool("whiten", errs).unwrap_or(false);
            Some(TaskConfig::Linear {
                n: n?,
                m: m?,
                d: d?,
                p: p?,
                noise_std,
                whiten,
            })
        }
        Some("class") => {
            let n = f.req_usize("n", errs);
            let d = f.req_usize("d", errs);
            let per_class = f.req_usize("per_class", errs);
            let spread = f.req_f64("spread", errs);
            let normalize = f.bool("normalize", errs).unwrap_or(false);
            let eval_per_class = f.usize("eval_per_class", errs).unwrap_or(0);
            Some(TaskConfig::Class {
                n: n?,
                d: d?,
                per_class: per_class?,
                spread: spread?,
                normalize,
                eval_per_class,
            })
        }
        Some(other) => {
            errs.push(format!("task.type: unknown value \"{other}\" (expected linear or class)"));
            None
        }
        None => {
            if !t.contains_key("type") {
                errs.push("task.type: missing required task type (linear or class)".into());
            }
            None
        }
    };
    // Keys of the other task type are unknown here, so only finish when the
    // type was recognized.
    if out.is_some() || matches!(kind, Some("linear" | "class")) {
        f.finish(errs);
    }
    out
}

fn read_network(t: &Table, errs: &mut Vec<String>) -> Option<NetworkConfig> {
    let mut f = Fields::new("network", t);
    let widths = f.req("widths", errs, |v| v.as_array()?.iter().map(as_usize).collect(), "a list of layer widths");
    let depth = widths.as_ref().map_or(0, |w: &Vec<usize>| w.len().saturating_sub(1));
    let activations = match f.value("activations") {
        None => Some(vec![Activation::Linear; depth]),
        Some(v) => match v.as_array() {
            Some(items) => {
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    match item.clone().try_into::<Activation>() {
                        Ok(a) => out.push(a),
                        Err(_) => errs.push(format!(
                            "network.activations[{i}]: expected one of {ACTIVATIONS}, got {}",
                            describe(item)
                        )),
                    }
                }
                (out.len() == items.len()).then_some(out)
            }
            None => {
                errs.push(format!("network.activations: expected a list, got {}", describe(v)));
                None
            }
        },
    };
    let loss = if t.contains_key("loss") {
        f.variant("loss", errs, LOSSES)
    } else {
        Some(Loss::SquaredError)
    };
    let init = match f.str("init", errs).unwrap_or("kaiming_uniform") {
        "gaussian" => {
            let std = f.f64("init_std", errs).unwrap_or(1e-3);
            Some(WeightInit::Gaussian { std })
        }
        "kaiming_uniform" => {
            let gain = f.f64("init_gain", errs).unwrap_or(1.0);
            Some(WeightInit::KaimingUniform { gain })
        }
        other => {
            errs.push(format!(
                "network.init: unknown value \"{other}\" (expected gaussian or kaiming_uniform)"
            ));
            None
        }
    };
    f.finish(errs);
    Some(NetworkConfig {
        widths: widths?,
        activations: activations?,
        loss: loss?,
        init: init?,
    })
}

fn read_pathways(top: &mut Fields<'_>, depth: usize, errs: &mut Vec<String>) -> Option<Vec<PathwayConfig>> {
    let hidden = depth.saturating_sub(1);
    let Some(v) = top.value("pathways") else {
        if hidden > 0 {
            errs.push(format!("pathways: missing; the network has {hidden} hidden layer(s) that need one"));
            return None;
        }
        return Some(Vec::new());
    };
    let Some(items) = v.as_array() else {
        errs.push(format!("pathways: expected a list of tables, got {}", describe(v)));
        return None;
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let Some(t) = item.as_table() else {
            errs.push(format!("pathways[{i}]: expected a table, got {}", describe(item)));
            continue;
        };
        let mut f = Fields::new(&format!("pathways[{i}]"), t);
        let kind = if t.contains_key("kind") {
            f.variant("kind", errs, PATHWAY_KINDS)
        } else {
            f.seen.push("kind");
            errs.push(format!("pathways[{i}].kind: missing required pathway kind ({PATHWAY_KINDS})"));
            None
        };
        let rank = f.usize("rank", errs);
        let source_layer = f.usize("source_layer", errs);
        let update_q = f.bool("update_q", errs).unwrap_or(false);
        let use_targets = f.bool("use_targets", errs).unwrap_or(false);
        let raw_oja = f.bool("raw_oja", errs).unwrap_or(false);
        f.finish(errs);
        if let Some(kind) = kind {
            out.push(PathwayConfig {
                kind,
                rank,
                source_layer,
                update_q,
                use_targets,
                raw_oja,
            });
        }
    }
    if out.len() != items.len() {
        return None;
    }
    // A single entry serves every hidden layer.
    if out.len() == 1 && hidden > 1 {
        out = vec![out[0]; hidden];
    }
    Some(out)
}

fn read_train(t: &Table, errs: &mut Vec<String>) -> Option<TrainSection> {
    let mut f = Fields::new("train", t);
    let d = TrainConfig::default();
    let out = TrainSection {
        eta: f.f64("eta", errs).unwrap_or(d.eta),
        lambda: f.f64("lambda", errs).unwrap_or(d.lambda),
        batch: f.usize("batch", errs).unwrap_or(d.batch),
        steps: f.usize("steps", errs).unwrap_or(d.steps),
        record_every: f.usize("record_every", errs).unwrap_or(d.record_every),
        tau: f.f64("tau", errs).unwrap_or(d.tau),
    };
    f.finish(errs);
    Some(out)
}

fn read_feedback(t: &Table, eta: Option<f64>, errs: &mut Vec<String>) -> Option<FeedbackHyper> {
    let mut f = Fields::new("feedback", t);
    let d = FeedbackHyper::default();
    let out = FeedbackHyper {
        eta_fb: f.f64("eta_fb", errs).or(eta).unwrap_or(d.eta_fb),
        lambda: f.f64("lambda", errs).unwrap_or(d.lambda),
        update_interval: f.usize("update_interval", errs).unwrap_or(d.update_interval),
    };
    f.finish(errs);
    Some(out)
}

fn read_theory(t: &Table, errs: &mut Vec<String>) -> Option<TheoryConfig> {
    let mut f = Fields::new("theory", t);
    let out = TheoryConfig {
        substeps: f.usize("substeps", errs).unwrap_or(1),
        tolerance: f.f64("tolerance", errs).unwrap_or(0.05),
    };
    f.finish(errs);
    Some(out)
}

fn read_sweep(t: &Table, errs: &mut Vec<String>) -> Option<SweepConfig> {
    let mut f = Fields::new("sweep", t);
    let ranks = f.req("ranks", errs, |v| v.as_array()?.iter().map(as_usize).collect(), "a list of ranks");
    let include_full = f.bool("include_full", errs).unwrap_or(true);
    let target_fraction = f.f64("target_fraction", errs).unwrap_or(0.9);
    f.finish(errs);
    Some(SweepConfig {
        ranks: ranks?,
        include_full,
        target_fraction,
    })
}

fn read_flops(
    t: &Table,
    train: Option<&TrainSection>,
    feedback: Option<&FeedbackHyper>,
    errs: &mut Vec<String>,
) -> Option<FlopsConfig> {
    let mut f = Fields::new("flops", t);
    let batch = f.usize("batch", errs).or(train.map(|t| t.batch.max(1)));
    let update_interval = f.usize("update_interval", errs).or(feedback.map(|h| h.update_interval));
    let ranks = f.usize_list("ranks", errs).unwrap_or_default();
    f.finish(errs);
    Some(FlopsConfig {
        batch: batch?,
        update_interval: update_interval?,
        ranks,
    })
}

/// Semantic checks on a schema-valid experiment.
fn validate(x: &Experiment, errs: &mut Vec<String>) {
    let widths = &x.network.widths;
    let depth = widths.len().saturating_sub(1);
    if widths.len() < 2 {
        errs.push("network.widths: need at least an input and an output width".into());
    }
    if let Some(i) = widths.iter().position(|&w| w == 0) {
        errs.push(format!("network.widths[{i}]: width must be >= 1"));
    }
    if x.network.activations.len() != depth {
        errs.push(format!(
            "network.activations: {} entries for {depth} weight layers",
            x.network.activations.len()
        ));
    }
    match x.network.init {
        WeightInit::Gaussian { std } if !(std >= 0.0) => errs.push("network.init_std: must be >= 0".into()),
        WeightInit::KaimingUniform { gain } if !(gain >= 0.0) => errs.push("network.init_gain: must be >= 0".into()),
        _ => {}
    }
    if x.repeats == 0 {
        errs.push("repeats: must be >= 1".into());
    }

    let hidden = depth.saturating_sub(1);
    if x.pathways.len() != hidden {
        errs.push(format!(
            "pathways: {} entries for {hidden} hidden layer(s); give one per hidden layer or a single shared entry",
            x.pathways.len()
        ));
    }
    let sweeping = x.kind == Kind::RankSweep;
    for (i, pw) in x.pathways.iter().enumerate() {
        let layer = i + 1;
        let at = format!("pathways[{i}] (layer {layer})");
        let source = pw.source_layer.unwrap_or(layer + 1);
        if source <= layer {
            errs.push(format!(
                "{at}: source_layer {source} must be downstream of layer {layer}"
            ));
        } else if source > depth {
            errs.push(format!("{at}: source_layer {source} exceeds the output layer {depth}"));
        }
        if pw.rank == Some(0) {
            errs.push(format!("{at}: rank must be ≥ 1"));
        }
        if pw.kind.is_factored() && pw.rank.is_none() && !sweeping {
            errs.push(format!("{at}: {} pathways need a rank", kind_name(pw.kind)));
        }
        if pw.kind == PathwayKind::Transpose && pw.rank.is_some() {
            errs.push(format!("{at}: transpose pathways take no rank"));
        }
        if matches!(pw.kind, PathwayKind::Transpose | PathwayKind::FactoredNormative) && source != layer + 1 {
            errs.push(format!(
                "{at}: {} pathways read the next layer's weights and must have source_layer {}",
                kind_name(pw.kind),
                layer + 1
            ));
        }
        if let (Some(r), false) = (pw.rank, sweeping) {
            if source > layer && source <= depth && widths.len() > source {
                let bound = widths[layer].min(widths[source]);
                if r > bound {
                    errs.push(format!(
                        "{at}: rank {r} exceeds min(layer width {}, source width {}) = {bound}",
                        widths[layer], widths[source]
                    ));
                }
            }
        }
        if pw.kind != PathwayKind::FactoredLocal && (pw.update_q || pw.use_targets || pw.raw_oja) {
            errs.push(format!("{at}: update_q, use_targets and raw_oja apply to factored_local only"));
        }
        if pw.use_targets && source != depth {
            errs.push(format!("{at}: use_targets needs source_layer {depth} (the output)"));
        }
    }

    let t = &x.train;
    if !(t.eta > 0.0 && t.eta.is_finite()) && x.kind != Kind::FlopsReport {
        errs.push(format!("train.eta: must be > 0, got {}", t.eta));
    }
    if !(t.lambda >= 0.0) {
        errs.push("train.lambda: must be >= 0".into());
    }
    if t.record_every == 0 {
        errs.push("train.record_every: must be >= 1".into());
    }
    if !(t.tau > 0.0) {
        errs.push("train.tau: must be > 0".into());
    }
    if !(x.feedback.eta_fb >= 0.0) {
        errs.push("feedback.eta_fb: must be >= 0".into());
    }
    if !(x.feedback.lambda >= 0.0) {
        errs.push("feedback.lambda: must be >= 0".into());
    }
    if x.feedback.update_interval == 0 {
        errs.push("feedback.update_interval: must be >= 1".into());
    }

    validate_task(x, errs);
    validate_kind(x, errs);
}

fn validate_task(x: &Experiment, errs: &mut Vec<String>) {
    let Some(task) = &x.task else {
        if x.kind != Kind::FlopsReport {
            errs.push("task: missing required table".into());
        }
        return;
    };
    match *task {
        TaskConfig::Linear { n, m, d, p, noise_std, whiten } => {
            if d > n.min(m) {
                errs.push(format!("task.d: rank {d} exceeds min(n, m) = {}", n.min(m)));
            }
            if n == 0 || m == 0 || p == 0 {
                errs.push("task: n, m and p must be >= 1".into());
            }
            if !(noise_std >= 0.0) {
                errs.push("task.noise_std: must be >= 0".into());
            }
            if whiten && p < n {
                errs.push(format!("task.whiten: needs p >= n (p = {p}, n = {n})"));
            }
        }
        TaskConfig::Class {
            n, d, per_class, spread, ..
        } => {
            if d < 2 {
                errs.push("task.d: need at least 2 classes".into());
            }
            if n == 0 || per_class == 0 {
                errs.push("task: n and per_class must be >= 1".into());
            }
            if !(spread >= 0.0) {
                errs.push("task.spread: must be >= 0".into());
            }
        }
    }
    let (input, output) = task.dims();
    let widths = &x.network.widths;
    if widths.len() >= 2 && (widths[0] != input || widths[widths.len() - 1] != output) {
        errs.push(format!(
            "network.widths: task maps {input} -> {output} but the network is {} -> {}",
            widths[0],
            widths[widths.len() - 1]
        ));
    }
}

fn validate_kind(x: &Experiment, errs: &mut Vec<String>) {
    let linear_task = matches!(x.task, Some(TaskConfig::Linear { .. }));
    let class_task = matches!(x.task, Some(TaskConfig::Class { .. }));
    match x.kind {
        Kind::LinearSim if x.task.is_some() && !linear_task => {
            errs.push("task.type: linear-sim needs a linear task".into());
        }
        Kind::LinearTheory => {
            if x.task.is_some() && !linear_task {
                errs.push("task.type: linear-theory needs a linear task".into());
            }
            if let Some(TaskConfig::Linear { whiten: false, .. }) = x.task {
                errs.push("task.whiten: linear-theory needs whitened inputs".into());
            }
            if x.network.widths.len() != 3 || x.network.activations.iter().any(|&a| a != Activation::Linear) {
                errs.push("network: linear-theory needs a two-layer linear network".into());
            }
            if x.network.loss != Loss::SquaredError {
                errs.push("network.loss: linear-theory needs squared_error".into());
            }
            if x.train.batch != 0 {
                errs.push("train.batch: linear-theory trains on the full set (batch = 0)".into());
            }
            if x.pathways.first().is_some_and(|p| p.kind == PathwayKind::Transpose) {
                errs.push("pathways[0].kind: linear-theory has no transpose regime".into());
            }
            match x.theory {
                Some(t) if t.substeps == 0 => errs.push("theory.substeps: must be >= 1".into()),
                Some(t) if !(t.tolerance >= 0.0) => errs.push("theory.tolerance: must be >= 0".into()),
                _ => {}
            }
        }
        Kind::MlpTrain if x.task.is_some() && !class_task => {
            errs.push("task.type: mlp-train needs a class task".into());
        }
        Kind::RankSweep => match &x.sweep {
            None => errs.push("sweep: missing required table for rank-sweep".into()),
            Some(s) => {
                if s.ranks.is_empty() && !s.include_full {
                    errs.push("sweep.ranks: nothing to sweep".into());
                }
                if s.ranks.contains(&0) {
                    errs.push("sweep.ranks: rank must be ≥ 1".into());
                }
                if !(s.target_fraction > 0.0 && s.target_fraction <= 1.0) {
                    errs.push("sweep.target_fraction: must be in (0, 1]".into());
                }
                if !x.pathways.iter().any(|p| p.kind.is_factored()) {
                    errs.push("pathways: rank-sweep needs at least one factored pathway".into());
                }
            }
        },
        Kind::FlopsReport => {
            if let Some(f) = &x.flops {
                if f.batch == 0 || f.update_interval == 0 {
                    errs.push("flops: batch and update_interval must be >= 1".into());
                }
                if f.ranks.contains(&0) {
                    errs.push("flops.ranks: rank must be ≥ 1".into());
                }
            }
        }
        _ => {}
    }
    let extra = |name: &str, present: bool, wanted: bool, errs: &mut Vec<String>| {
        if present && !wanted {
            errs.push(format!("{name}: not used by {}", kind_label(x.kind)));
        }
    };
    extra("theory", x.theory.is_some(), x.kind == Kind::LinearTheory, errs);
    extra("sweep", x.sweep.is_some(), x.kind == Kind::RankSweep, errs);
    extra("flops", x.flops.is_some(), x.kind == Kind::FlopsReport, errs);
}

fn kind_name(kind: PathwayKind) -> &'static str {
    match kind {
        PathwayKind::Transpose => "transpose",
        PathwayKind::FixedRandom => "fixed_random",
        PathwayKind::FactoredNormative => "factored_normative",
        PathwayKind::FactoredLocal => "factored_local",
    }
}

pub fn kind_label(kind: Kind) -> &'static str {
    match kind {
        Kind::LinearSim => "linear-sim",
        Kind::LinearTheory => "linear-theory",
        Kind::MlpTrain => "mlp-train",
        Kind::RankSweep => "rank-sweep",
        Kind::FlopsReport => "flops-report",
    }
}
