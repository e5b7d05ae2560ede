//! Layer shape manifests and layer classification.
//!
//! Dimension estimates depend only on layer shapes, so a manifest is enough
//! to analyze an architecture without its weights. The file format is a
//! JSON array of `{"name", "shape", "kind"}` objects.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::TensorRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv4D,
    Dense2D,
    Other,
}

impl LayerKind {
    pub fn is_analyzable(self) -> bool {
        !matches!(self, LayerKind::Other)
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv4D => "conv4d",
            LayerKind::Dense2D => "dense2d",
            LayerKind::Other => "other",
        }
    }
}

/// Rank decides: 4 is a convolution, 2 is dense, anything else is other.
pub fn classify_shape(shape: &[usize]) -> LayerKind {
    match shape.len() {
        4 => LayerKind::Conv4D,
        2 => LayerKind::Dense2D,
        _ => LayerKind::Other,
    }
}

pub fn classify_layer(record: &TensorRecord) -> LayerKind {
    classify_shape(&record.shape)
}

/// VGG-style extraction: only rank-4 tensors under `features.` count as
/// convolutions. The hint never touches dense or other layers.
pub fn classify_layer_vgg(record: &TensorRecord) -> LayerKind {
    match classify_shape(&record.shape) {
        LayerKind::Conv4D if !record.name.starts_with("features.") => LayerKind::Other,
        kind => kind,
    }
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: LayerKind,
    /// False for builtin shapes that are conventional guesses rather than
    /// fixed by the architecture or a published value.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub pinned: bool,
}

impl ManifestEntry {
    pub fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            kind: classify_shape(shape),
            shape: shape.to_vec(),
            pinned: true,
        }
    }

    fn unpinned(mut self) -> Self {
        self.pinned = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeManifest {
    pub model_name: String,
    pub entries: Vec<ManifestEntry>,
}

impl ShapeManifest {
    pub fn new(model_name: impl Into<String>, entries: Vec<ManifestEntry>) -> Result<Self> {
        let manifest = Self {
            model_name: model_name.into(),
            entries,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::InvalidManifest(format!(
                    "duplicate entry {:?}",
                    e.name
                )));
            }
            let rank_ok = match e.kind {
                LayerKind::Conv4D => e.shape.len() == 4,
                LayerKind::Dense2D => e.shape.len() == 2,
                LayerKind::Other => true,
            };
            if !rank_ok {
                return Err(Error::InvalidManifest(format!(
                    "entry {:?} is {} but has shape {:?}",
                    e.name,
                    e.kind.name(),
                    e.shape
                )));
            }
            if e.kind.is_analyzable() && e.shape.contains(&0) {
                return Err(Error::InvalidManifest(format!(
                    "entry {:?} has a zero dimension in {:?}",
                    e.name, e.shape
                )));
            }
        }
        Ok(())
    }

    pub fn from_records(model_name: impl Into<String>, records: &[TensorRecord]) -> Result<Self> {
        let entries = records
            .iter()
            .map(|r| ManifestEntry::new(r.name.clone(), &r.shape))
            .collect();
        Self::new(model_name, entries)
    }

    pub fn from_json(model_name: impl Into<String>, json: &str) -> Result<Self> {
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(json).map_err(|e| Error::InvalidManifest(e.to_string()))?;
        Self::new(model_name, entries)
    }

    /// Loads a manifest file; the model name is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_json(name, &text)
    }

    /// Entries as the JSON array written to manifest files.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.entries).map_err(|e| Error::json("encoding manifest", e))
    }

    pub fn get(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn analyzable(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.kind.is_analyzable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    ResNet18,
    Vgg16,
    SimpleCnn15,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::ResNet18, Arch::Vgg16, Arch::SimpleCnn15];

    pub fn name(self) -> &'static str {
        match self {
            Arch::ResNet18 => "resnet18",
            Arch::Vgg16 => "vgg16",
            Arch::SimpleCnn15 => "simplecnn15",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resnet18" | "resnet-18" => Ok(Arch::ResNet18),
            "vgg16" | "vgg-16" => Ok(Arch::Vgg16),
            "simplecnn15" | "simplecnn" | "simplecnn-15" => Ok(Arch::SimpleCnn15),
            _ => Err(Error::UnknownArch(s.to_string())),
        }
    }
}

fn conv(out: &mut Vec<ManifestEntry>, name: &str, n: usize, c: usize, k: usize) {
    out.push(ManifestEntry::new(format!("{name}.weight"), &[n, c, k, k]));
}

fn bias(out: &mut Vec<ManifestEntry>, name: &str, n: usize) {
    out.push(ManifestEntry::new(format!("{name}.bias"), &[n]));
}

fn batch_norm(out: &mut Vec<ManifestEntry>, name: &str, n: usize) {
    out.push(ManifestEntry::new(format!("{name}.weight"), &[n]));
    bias(out, name, n);
}

fn dense(out: &mut Vec<ManifestEntry>, name: &str, n_out: usize, n_in: usize) {
    out.push(ManifestEntry::new(format!("{name}.weight"), &[n_out, n_in]));
    bias(out, name, n_out);
}

/// CIFAR-10 ResNet-18: 3×3 stem, four stages of two basic blocks, 1×1
/// projection shortcuts where the width changes.
fn resnet18() -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    conv(&mut out, "conv1", 64, 3, 3);
    batch_norm(&mut out, "bn1", 64);
    let mut in_ch = 64;
    for (stage, width) in [(1, 64), (2, 128), (3, 256), (4, 512)] {
        for block in 0..2 {
            let prefix = format!("layer{stage}.{block}");
            let block_in = if block == 0 { in_ch } else { width };
            conv(&mut out, &format!("{prefix}.conv1"), width, block_in, 3);
            batch_norm(&mut out, &format!("{prefix}.bn1"), width);
            conv(&mut out, &format!("{prefix}.conv2"), width, width, 3);
            batch_norm(&mut out, &format!("{prefix}.bn2"), width);
            if block == 0 && block_in != width {
                conv(
                    &mut out,
                    &format!("{prefix}.downsample.0"),
                    width,
                    block_in,
                    1,
                );
                batch_norm(&mut out, &format!("{prefix}.downsample.1"), width);
            }
        }
        in_ch = width;
    }
    dense(&mut out, "fc", 10, 512);
    out
}

/// CIFAR-10 VGG-16 without batch norm, torchvision layer indices, 4096-wide
/// classifier on a 512-dim feature vector.
fn vgg16() -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    let convs = [
        (0, 64, 3),
        (2, 64, 64),
        (5, 128, 64),
        (7, 128, 128),
        (10, 256, 128),
        (12, 256, 256),
        (14, 256, 256),
        (17, 512, 256),
        (19, 512, 512),
        (21, 512, 512),
        (24, 512, 512),
        (26, 512, 512),
        (28, 512, 512),
    ];
    for (idx, n, c) in convs {
        let name = format!("features.{idx}");
        conv(&mut out, &name, n, c, 3);
        bias(&mut out, &name, n);
    }
    dense(&mut out, "classifier.0", 4096, 512);
    dense(&mut out, "classifier.3", 4096, 4096);
    dense(&mut out, "classifier.6", 10, 4096);
    out
}

/// Fifteen 3×3 convolutions and three dense layers. Only conv1, conv3,
/// conv4 and the dense stack are fixed by published values; the remaining
/// widths follow the usual doubling pattern and are marked unpinned.
fn simplecnn15() -> Vec<ManifestEntry> {
    let mut out = Vec::new();
    let widths: [(usize, usize, bool); 15] = [
        (64, 3, true),
        (64, 64, false),
        (64, 64, true),
        (128, 128, true),
        (128, 128, false),
        (128, 128, false),
        (256, 128, false),
        (256, 256, false),
        (512, 256, false),
        (512, 512, false),
        (512, 512, false),
        (512, 512, false),
        (512, 512, false),
        (512, 512, false),
        (512, 512, false),
    ];
    for (i, (n, c, pinned)) in widths.into_iter().enumerate() {
        let name = format!("conv{}", i + 1);
        conv(&mut out, &name, n, c, 3);
        if !pinned {
            let last = out.pop().expect("just pushed");
            out.push(last.unpinned());
        }
        bias(&mut out, &name, n);
    }
    dense(&mut out, "fc1", 512, 2048);
    dense(&mut out, "fc2", 256, 512);
    dense(&mut out, "fc3", 10, 256);
    out
}

pub fn builtin_manifest(arch: Arch) -> ShapeManifest {
    let entries = match arch {
        Arch::ResNet18 => resnet18(),
        Arch::Vgg16 => vgg16(),
        Arch::SimpleCnn15 => simplecnn15(),
    };
    ShapeManifest::new(arch.name(), entries).expect("builtin manifests are valid")
}
