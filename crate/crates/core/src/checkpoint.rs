//! Network checkpoints: a JSON description plus one matrix dump per
//! weight and feedback parameter. Reloading restores every value
//! bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{FeedbackPathway, LocalRule, PathwayKind, PathwayState};
use crate::linalg::dump;
use crate::network::{Activation, Layer, Loss, Network, Resume};

#[derive(Serialize, Deserialize)]
struct PathwayMeta {
    layer: usize,
    kind: PathwayKind,
    source_layer: usize,
    #[serde(default)]
    rule: Option<LocalRule>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    activations: Vec<Activation>,
    loss: Loss,
    pathways: Vec<PathwayMeta>,
    resume: Resume,
    /// Free-form run configuration stored alongside, for provenance.
    #[serde(default)]
    config: Option<serde_json::Value>,
}

/// Network state plus the progress needed to resume training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: Network,
    pub resume: Resume,
    pub config: Option<serde_json::Value>,
}

pub fn save(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let net = &ckpt.net;
    for (i, layer) in net.layers.iter().enumerate() {
        dump::write(&dir.join(format!("w{}.txt", i + 1)), &layer.w)?;
    }
    let mut pathways = Vec::new();
    for (idx, pw) in net.pathways.iter().enumerate() {
        let Some(pw) = pw else { continue };
        let layer = idx + 1;
        match &pw.state {
            PathwayState::Transpose => {}
            PathwayState::FixedRandom { b } => dump::write(&dir.join(format!("b{layer}.txt")), b)?,
            PathwayState::Normative { q, p } | PathwayState::Local { q, p, .. } => {
                dump::write(&dir.join(format!("q{layer}.txt")), q)?;
                dump::write(&dir.join(format!("p{layer}.txt")), p)?;
            }
        }
        pathways.push(PathwayMeta {
            layer,
            kind: pw.kind(),
            source_layer: pw.source_layer,
            rule: pw.local_rule(),
        });
    }
    let manifest = Manifest {
        activations: net.layers.iter().map(|l| l.activation).collect(),
        loss: net.loss,
        pathways,
        resume: ckpt.resume,
        config: ckpt.config.clone(),
    };
    let path = dir.join("network.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join("network.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    let layers = manifest
        .activations
        .iter()
        .enumerate()
        .map(|(i, &activation)| {
            Ok(Layer {
                w: dump::read(&dir.join(format!("w{}.txt", i + 1)))?,
                activation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pathways: Vec<Option<FeedbackPathway>> = vec![None; layers.len().saturating_sub(1)];
    for meta in manifest.pathways {
        let layer = meta.layer;
        if layer == 0 || layer > pathways.len() {
            return Err(Error::parse(&path, format!("pathway for nonexistent layer {layer}")));
        }
        let state = match meta.kind {
            PathwayKind::Transpose => PathwayState::Transpose,
            PathwayKind::FixedRandom => PathwayState::FixedRandom {
                b: dump::read(&dir.join(format!("b{layer}.txt")))?,
            },
            PathwayKind::FactoredNormative | PathwayKind::FactoredLocal => {
                let q = dump::read(&dir.join(format!("q{layer}.txt")))?;
                let p = dump::read(&dir.join(format!("p{layer}.txt")))?;
                if meta.kind == PathwayKind::FactoredNormative {
                    PathwayState::Normative { q, p }
                } else {
                    PathwayState::Local {
                        q,
                        p,
                        rule: meta.rule.unwrap_or_default(),
                    }
                }
            }
        };
        pathways[layer - 1] = Some(FeedbackPathway {
            source_layer: meta.source_layer,
            state,
        });
    }
    Ok(Checkpoint {
        net: Network::new(layers, pathways, manifest.loss)?,
        resume: manifest.resume,
        config: manifest.config,
    })
}
