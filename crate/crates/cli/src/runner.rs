//! Executes parsed experiments and writes their artifacts.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use ldfa_core::feedback::{PathwayKind, PathwayState};
use ldfa_core::linalg::{svd, Matrix};
use ldfa_core::metrics::{flop_report, flops_to_accuracy_of, FlopReport};
use ldfa_core::network::{train, Network, PathwaySpec, TrainData};
use ldfa_core::tasks::{make_class_task, make_linear_task, ClassTask, ClassTaskSpec, LinearTask, LinearTaskSpec};
use ldfa_core::theory::{integrate, rotate_in, LinearNetState, OdeConfig, Regime, RotationBasis};
use ldfa_core::trajectory::Trajectory;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compare::{compare_trajectories, Comparison};
use crate::config::{kind_label, Experiment, ExperimentConfig, Kind, TaskConfig};
use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_ROOT_VAR: &str = "LDFA_OUT_ROOT";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Output directory; overrides the config and the environment.
    pub out: Option<PathBuf>,
    /// Added to every seed.
    pub seed_offset: u64,
    /// Worker threads for independent runs; 0 picks the number of cores.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub role: String,
    pub seed: Option<u64>,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub kind: Kind,
    pub config_hash: String,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputFile>,
    pub engine_version: String,
    pub started: String,
    pub finished: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory chosen by precedence: `--out`, the config's
/// `out_dir`, `$LDFA_OUT_ROOT/<name>`, then `runs/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    if let Some(out) = &opts.out {
        return out.clone();
    }
    if let Some(out) = &cfg.out_dir {
        return out.clone();
    }
    match env::var_os(OUT_ROOT_VAR) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(&cfg.name),
        _ => PathBuf::from("runs").join(&cfg.name),
    }
}

pub fn seeds(x: &Experiment, offset: u64) -> Vec<u64> {
    (0..x.repeats as u64).map(|i| x.seed + offset + i).collect()
}

/// Runs every repeat of an experiment and writes the manifest last.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest, CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let dir = output_dir(cfg, opts);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let x = &cfg.experiment;
    let seeds = seeds(x, opts.seed_offset);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Engine(ldfa_core::Error::InvalidInput(e.to_string())))?;
    info!("{} '{}' with seeds {:?} into {}", kind_label(x.kind), cfg.name, seeds, dir.display());

    let outputs = pool.install(|| match x.kind {
        Kind::LinearSim | Kind::MlpTrain => run_training(cfg, &seeds, &dir),
        Kind::LinearTheory => run_theory(cfg, &seeds, &dir),
        Kind::RankSweep => run_sweep(cfg, &seeds, &dir),
        Kind::FlopsReport => run_flops(cfg, &dir),
    })?;

    for out in &outputs {
        let path = dir.join(&out.path);
        let len = fs::metadata(&path).map_err(|e| CliError::io(&path, e))?.len();
        if len == 0 {
            return Err(CliError::io(
                &path,
                std::io::Error::other("output file is empty"),
            ));
        }
    }
    let manifest = RunManifest {
        name: cfg.name.clone(),
        kind: x.kind,
        config_hash: x.hash(),
        config: cfg.clone(),
        seeds: if x.kind == Kind::FlopsReport { Vec::new() } else { seeds },
        outputs,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn linear_task(x: &Experiment, seed: u64) -> Result<LinearTask, CliError> {
    match x.task {
        Some(TaskConfig::Linear {
            n,
            m,
            d,
            p,
            noise_std,
            whiten,
        }) => Ok(make_linear_task(&LinearTaskSpec {
            n,
            m,
            d,
            p,
            noise_std,
            seed,
            whiten,
        })?),
        _ => Err(CliError::Config(vec!["task.type: expected a linear task".into()])),
    }
}

/// Training task plus the held-out set (when configured).
pub fn class_task(x: &Experiment, seed: u64) -> Result<(ClassTask, Option<(Matrix, Vec<usize>)>), CliError> {
    match x.task {
        Some(TaskConfig::Class {
            n,
            d,
            per_class,
            spread,
            normalize,
            eval_per_class,
        }) => {
            let task = make_class_task(&ClassTaskSpec {
                n,
                d,
                per_class,
                spread,
                seed,
                normalize,
            })?;
            let eval = (eval_per_class > 0).then(|| task.resample(eval_per_class, seed));
            Ok((task, eval))
        }
        _ => Err(CliError::Config(vec!["task.type: expected a class task".into()])),
    }
}

pub fn build_network(x: &Experiment, specs: &[PathwaySpec], seed: u64) -> Result<Network, CliError> {
    let n = &x.network;
    Ok(Network::build(&n.widths, &n.activations, specs, n.loss, n.init, seed)?)
}

/// Trains one network on the experiment's task.
pub fn train_once(x: &Experiment, specs: &[PathwaySpec], seed: u64) -> Result<(Network, Trajectory), CliError> {
    let mut net = build_network(x, specs, seed)?;
    let cfg = x.train_config(seed);
    let traj = match x.task {
        Some(TaskConfig::Linear { .. }) => {
            let task = linear_task(x, seed)?;
            train(&mut net, TrainData::Linear(&task), &cfg)?
        }
        _ => {
            let (task, eval) = class_task(x, seed)?;
            let eval = eval.as_ref().map(|(m, l)| (m, l.as_slice()));
            train(&mut net, TrainData::Class { task: &task, eval }, &cfg)?
        }
    };
    Ok((net, traj))
}

fn csv_name(name: &str, label: Option<&str>, seed: u64) -> String {
    match label {
        Some(label) => format!("{name}_{label}_seed{seed}.csv"),
        None => format!("{name}_seed{seed}.csv"),
    }
}

fn run_training(cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> Result<Vec<OutputFile>, CliError> {
    let x = &cfg.experiment;
    let specs = x.pathway_specs();
    let runs: Vec<Result<(OutputFile, Trajectory), CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let (_, traj) = train_once(x, &specs, seed)?;
            let file = csv_name(&cfg.name, None, seed);
            write_text(&dir.join(&file), &traj.to_csv())?;
            Ok((output(file, "trajectory", Some(seed), None), traj))
        })
        .collect();
    let (mut outputs, trajs) = split(runs)?;
    outputs.push(write_aggregate(dir, &cfg.name, &[(None, trajs.iter().collect())])?);
    Ok(outputs)
}

fn output(path: String, role: &str, seed: Option<u64>, label: Option<&str>) -> OutputFile {
    OutputFile {
        path: PathBuf::from(path),
        role: role.to_string(),
        seed,
        label: label.map(str::to_string),
    }
}

fn split<T>(runs: Vec<Result<(OutputFile, T), CliError>>) -> Result<(Vec<OutputFile>, Vec<T>), CliError> {
    let mut outputs = Vec::new();
    let mut values = Vec::new();
    for r in runs {
        let (o, v) = r?;
        outputs.push(o);
        values.push(v);
    }
    Ok((outputs, values))
}

/// Mean and sample standard deviation of one terminal metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub count: usize,
}

/// Last recorded value of every metric present in the trajectory.
pub fn terminal_metrics(traj: &Trajectory) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let Some(last) = traj.last() else { return out };
    out.insert("loss".to_string(), last.loss);
    if let Some(a) = last.accuracy {
        out.insert("accuracy".into(), a);
    }
    if let Some(l) = &last.lambdas {
        for (i, v) in l.iter().enumerate() {
            out.insert(format!("lambda_{}", i + 1), *v);
        }
    }
    if let Some(v) = last.pp_orth_err {
        out.insert("pp_orth_err".into(), v);
    }
    if let Some(v) = last.subspace_angle_max {
        out.insert("subspace_angle_max".into(), v);
    }
    if let Some(v) = last.cum_macs {
        out.insert("cum_macs".into(), v as f64);
    }
    out
}

pub fn aggregate(trajs: &[&Trajectory]) -> BTreeMap<String, Stat> {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in trajs {
        for (k, v) in terminal_metrics(t) {
            values.entry(k).or_default().push(v);
        }
    }
    values
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (k, Stat { mean, std, count: v.len() })
        })
        .collect()
}

fn write_aggregate(
    dir: &Path,
    name: &str,
    groups: &[(Option<String>, Vec<&Trajectory>)],
) -> Result<OutputFile, CliError> {
    let file = format!("{name}_aggregate.json");
    let body: serde_json::Value = match groups {
        [(None, trajs)] => serde_json::to_value(aggregate(trajs)).unwrap(),
        _ => serde_json::Value::Object(
            groups
                .iter()
                .map(|(label, trajs)| {
                    (
                        label.clone().unwrap_or_default(),
                        serde_json::to_value(aggregate(trajs)).unwrap(),
                    )
                })
                .collect(),
        ),
    };
    write_json(&dir.join(&file), &body)?;
    Ok(output(file, "aggregate", None, None))
}

/// Simulation and integrated flow from the same initial weights.
pub struct TheoryRun {
    pub sim: Trajectory,
    pub theory: Trajectory,
    pub comparison: Comparison,
    /// Final feedback matrix and end-to-end map in rotated coordinates,
    /// and the rotated target.
    pub rotated_feedback: Matrix,
    pub rotated_map: Matrix,
    pub s: Matrix,
}

pub fn theory_once(x: &Experiment, seed: u64) -> Result<TheoryRun, CliError> {
    let task = linear_task(x, seed)?;
    let specs = x.pathway_specs();
    let mut net = build_network(x, &specs, seed)?;
    let start = linear_state(&net);
    let cfg = x.train_config(seed);
    let sim = train(&mut net, TrainData::Linear(&task), &cfg)?;

    let sigma = task.input_output_covariance();
    let basis = RotationBasis::new(&svd(&sigma)?);
    let pw = net.pathways[0].as_ref().expect("validated: one pathway");
    let theory_cfg = x.theory.expect("filled in for linear-theory");
    let fb = x.feedback;
    let dt = cfg.eta * cfg.tau / theory_cfg.substeps as f64;
    // Each feedback step moves the factors by eta_fb, every update_interval
    // training steps, so the factor time constant is tau * eta * interval / eta_fb.
    let factors_move = fb.eta_fb > 0.0 && pw.kind().is_factored();
    let regime = match pw.kind() {
        PathwayKind::FactoredNormative if factors_move => Regime::Normative,
        PathwayKind::FactoredLocal if factors_move => Regime::LocalOja,
        _ => Regime::FixedFeedback,
    };
    let ode = OdeConfig {
        dt,
        tau: cfg.tau,
        tau_b: if factors_move {
            cfg.tau * cfg.eta * fb.update_interval as f64 / fb.eta_fb
        } else {
            cfg.tau
        },
        lambda: if factors_move { fb.lambda / fb.eta_fb } else { 0.0 },
        t_end: cfg.steps as f64 * cfg.eta * cfg.tau,
        regime,
        update_q: pw.local_rule().is_some_and(|r| r.update_q),
        record_every: cfg.record_every * theory_cfg.substeps,
    };
    let flow = integrate(&rotate_in(&start, &basis), &ode)?;
    // Irreducible part of the training loss with whitened inputs.
    let p = task.p() as f64;
    let target_energy = task.targets.frobenius_norm().powi(2) / p;
    let offset = 0.5 * (target_energy - sigma.frobenius_norm().powi(2));
    let mut theory = flow.to_trajectory(task.d(), offset);
    for point in &mut theory.points {
        point.step /= theory_cfg.substeps;
    }
    let comparison = compare_trajectories(&sim, &theory, theory_cfg.tolerance);

    let end = rotate_in(&linear_state(&net), &basis);
    Ok(TheoryRun {
        sim,
        theory,
        comparison,
        rotated_feedback: end.feedback().expect("pathway is not a transpose"),
        rotated_map: end.product(),
        s: basis.s,
    })
}

fn linear_state(net: &Network) -> LinearNetState {
    let pw = net.pathways[0].as_ref();
    let (q, p) = match pw.and_then(|pw| pw.factors()) {
        Some((q, p)) => (Some(q.clone()), Some(p.clone())),
        None => (None, None),
    };
    let b = match pw.map(|pw| &pw.state) {
        Some(PathwayState::FixedRandom { b }) => Some(b.clone()),
        _ => None,
    };
    LinearNetState {
        w1: net.layers[0].w.clone(),
        w2: net.layers[1].w.clone(),
        p,
        q,
        b,
    }
}

fn run_theory(cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> Result<Vec<OutputFile>, CliError> {
    let x = &cfg.experiment;
    let runs: Vec<Result<(Vec<OutputFile>, Trajectory), CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let run = theory_once(x, seed)?;
            let sim = csv_name(&cfg.name, Some("sim"), seed);
            let theory = csv_name(&cfg.name, Some("theory"), seed);
            let cmp = format!("{}_comparison_seed{seed}.json", cfg.name);
            write_text(&dir.join(&sim), &run.sim.to_csv())?;
            write_text(&dir.join(&theory), &run.theory.to_csv())?;
            write_json(&dir.join(&cmp), &run.comparison)?;
            Ok((
                vec![
                    output(sim, "trajectory", Some(seed), Some("sim")),
                    output(theory, "theory", Some(seed), Some("theory")),
                    output(cmp, "comparison", Some(seed), None),
                ],
                run.sim,
            ))
        })
        .collect();
    let mut outputs = Vec::new();
    let mut trajs = Vec::new();
    for r in runs {
        let (o, t) = r?;
        outputs.extend(o);
        trajs.push(t);
    }
    outputs.push(write_aggregate(dir, &cfg.name, &[(None, trajs.iter().collect())])?);
    Ok(outputs)
}

/// One point of a rank sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub label: String,
    /// Requested rank; `None` for the transpose baseline.
    pub rank: Option<usize>,
    /// Rank actually used per hidden layer after clamping to the layer
    /// and source widths.
    pub effective_ranks: Vec<Option<usize>>,
    pub final_accuracy: Option<f64>,
    pub flops_to_target: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSeed {
    pub seed: u64,
    /// Accuracy the target fraction applies to: the transpose baseline's
    /// final accuracy, or the best final accuracy when there is none.
    pub reference_accuracy: f64,
    pub entries: Vec<SweepEntry>,
    /// Label with the fewest MACs to target; `None` if no entry got there.
    pub best: Option<String>,
    /// Whether `best` is neither the first nor the last entry.
    pub interior_minimum: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub target_fraction: f64,
    pub labels: Vec<String>,
    pub seeds: Vec<SweepSeed>,
    pub interior_count: usize,
}

/// Pathway specs for one sweep label: factored ranks set to `rank`
/// (clamped per layer), or every pathway replaced by the transpose.
pub fn sweep_specs(x: &Experiment, rank: Option<usize>) -> (Vec<PathwaySpec>, Vec<Option<usize>>) {
    let widths = &x.network.widths;
    x.pathways
        .iter()
        .enumerate()
        .map(|(i, pw)| {
            let layer = i + 1;
            let mut spec = pw.spec();
            match rank {
                None => {
                    spec.kind = PathwayKind::Transpose;
                    spec.rank = None;
                    spec.source_layer = None;
                    spec.rule = Default::default();
                }
                Some(r) if pw.kind.is_factored() => {
                    let source = pw.source_layer.unwrap_or(layer + 1);
                    spec.rank = Some(r.min(widths[layer]).min(widths[source]));
                }
                Some(_) => {}
            }
            let effective = spec.rank;
            (spec, effective)
        })
        .unzip()
}

pub fn sweep_labels(x: &Experiment) -> Vec<(String, Option<usize>)> {
    let sweep = x.sweep.as_ref().expect("validated: rank-sweep has a sweep table");
    let mut labels: Vec<(String, Option<usize>)> = sweep.ranks.iter().map(|&r| (format!("r{r}"), Some(r))).collect();
    if sweep.include_full {
        labels.push(("full".into(), None));
    }
    labels
}

/// Scores one seed's sweep trajectories, given in label order.
pub fn summarize_sweep(
    seed: u64,
    labels: &[(String, Option<usize>)],
    effective: &[Vec<Option<usize>>],
    trajs: &[&Trajectory],
    target_fraction: f64,
) -> Result<SweepSeed, CliError> {
    let finals: Vec<Option<f64>> = trajs.iter().map(|t| t.points.iter().rev().find_map(|p| p.accuracy)).collect();
    let full = labels.iter().position(|(_, r)| r.is_none());
    let reference = match full {
        Some(i) => finals[i].unwrap_or(0.0),
        None => finals.iter().flatten().copied().fold(0.0, f64::max),
    };
    let mut entries = Vec::new();
    for (i, (label, rank)) in labels.iter().enumerate() {
        entries.push(SweepEntry {
            label: label.clone(),
            rank: *rank,
            effective_ranks: effective[i].clone(),
            final_accuracy: finals[i],
            flops_to_target: flops_to_accuracy_of(trajs[i], target_fraction, reference)?,
        });
    }
    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.flops_to_target.map(|f| (i, f)))
        .min_by_key(|&(_, f)| f)
        .map(|(i, _)| i);
    Ok(SweepSeed {
        seed,
        reference_accuracy: reference,
        interior_minimum: best.is_some_and(|i| i > 0 && i + 1 < entries.len()),
        best: best.map(|i| entries[i].label.clone()),
        entries,
    })
}

fn run_sweep(cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> Result<Vec<OutputFile>, CliError> {
    let x = &cfg.experiment;
    let labels = sweep_labels(x);
    let target_fraction = x.sweep.as_ref().unwrap().target_fraction;
    let units: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..labels.len()).map(move |i| (s, i)))
        .collect();
    let runs: Vec<Result<(OutputFile, (Trajectory, Vec<Option<usize>>)), CliError>> = units
        .par_iter()
        .map(|&(seed, i)| {
            let (label, rank) = &labels[i];
            let (specs, effective) = sweep_specs(x, *rank);
            let (_, traj) = train_once(x, &specs, seed)?;
            let file = csv_name(&cfg.name, Some(label), seed);
            write_text(&dir.join(&file), &traj.to_csv())?;
            Ok((output(file, "trajectory", Some(seed), Some(label)), (traj, effective)))
        })
        .collect();
    let (mut outputs, results) = split(runs)?;

    let mut per_seed = Vec::new();
    for (k, &seed) in seeds.iter().enumerate() {
        let chunk = &results[k * labels.len()..(k + 1) * labels.len()];
        let trajs: Vec<&Trajectory> = chunk.iter().map(|(t, _)| t).collect();
        let effective: Vec<Vec<Option<usize>>> = chunk.iter().map(|(_, e)| e.clone()).collect();
        per_seed.push(summarize_sweep(seed, &labels, &effective, &trajs, target_fraction)?);
    }
    let summary = SweepSummary {
        target_fraction,
        labels: labels.iter().map(|(l, _)| l.clone()).collect(),
        interior_count: per_seed.iter().filter(|s| s.interior_minimum).count(),
        seeds: per_seed,
    };
    let file = format!("{}_sweep.json", cfg.name);
    write_json(&dir.join(&file), &summary)?;
    outputs.push(output(file, "sweep", None, None));

    let groups: Vec<(Option<String>, Vec<&Trajectory>)> = labels
        .iter()
        .enumerate()
        .map(|(i, (label, _))| {
            let trajs = (0..seeds.len()).map(|k| &results[k * labels.len() + i].0).collect();
            (Some(label.clone()), trajs)
        })
        .collect();
    outputs.push(write_aggregate(dir, &cfg.name, &groups)?);
    Ok(outputs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    pub layer: usize,
    pub n_layer: usize,
    pub n_source: usize,
    pub break_even_rank: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCost {
    pub rank: usize,
    pub report: FlopReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsSummary {
    pub configured: FlopReport,
    pub break_even: Vec<BreakEven>,
    pub by_rank: Vec<RankCost>,
}

fn run_flops(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<OutputFile>, CliError> {
    let x = &cfg.experiment;
    let flops = x.flops.as_ref().expect("filled in for flops-report");
    let net = build_network(x, &x.pathway_specs(), x.seed)?;
    let configured = flop_report(&net, flops.batch, flops.update_interval)?;
    let widths = &x.network.widths;
    let break_even = net
        .pathways
        .iter()
        .enumerate()
        .filter_map(|(i, pw)| {
            let pw = pw.as_ref()?;
            let layer = i + 1;
            let (a, b) = (widths[layer], widths[pw.source_layer]);
            Some(BreakEven {
                layer,
                n_layer: a,
                n_source: b,
                break_even_rank: ldfa_core::metrics::break_even_rank(a, b),
            })
        })
        .collect();
    let mut by_rank = Vec::new();
    for &r in &flops.ranks {
        let (specs, _) = sweep_specs(x, Some(r));
        let net = build_network(x, &specs, x.seed)?;
        by_rank.push(RankCost {
            rank: r,
            report: flop_report(&net, flops.batch, flops.update_interval)?,
        });
    }
    let file = format!("{}_flops.json", cfg.name);
    write_json(
        &dir.join(&file),
        &FlopsSummary {
            configured,
            break_even,
            by_rank,
        },
    )?;
    Ok(vec![output(file, "flops", None, None)])
}
