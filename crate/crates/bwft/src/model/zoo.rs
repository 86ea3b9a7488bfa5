//! The miniature backbone zoo.
//!
//! Five small sequential convolutional backbones with distinct shapes:
//! different depths, widths, pooling rhythms, and block structures (mini-vgg-bn
//! pairs each conv with a batch-norm; mini-cnn-deep stacks convs back to back
//! so some blocks span two weighted layers). Every entry stays under 200k
//! parameters including the classifier head, so a full search sweep runs in
//! minutes on a CPU.

use super::SequentialModel;
use crate::error::{Error, Result};
use crate::layer::{Activation, LayerKind, LayerSpec, Padding};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooEntry {
    MiniVgg,
    MiniVggBn,
    MiniCnnWide,
    MiniCnnDeep,
    MiniCnnPool,
}

impl ZooEntry {
    pub const ALL: [ZooEntry; 5] = [
        ZooEntry::MiniVgg,
        ZooEntry::MiniVggBn,
        ZooEntry::MiniCnnWide,
        ZooEntry::MiniCnnDeep,
        ZooEntry::MiniCnnPool,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ZooEntry::MiniVgg => "mini-vgg",
            ZooEntry::MiniVggBn => "mini-vgg-bn",
            ZooEntry::MiniCnnWide => "mini-cnn-wide",
            ZooEntry::MiniCnnDeep => "mini-cnn-deep",
            ZooEntry::MiniCnnPool => "mini-cnn-pool",
        }
    }

    pub fn from_name(name: &str) -> Result<ZooEntry> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::config(format!("unknown zoo entry {name:?}")))
    }

    pub fn backbone_specs(&self) -> Vec<LayerSpec> {
        match self {
            ZooEntry::MiniVgg => SpecBuilder::new()
                .conv(8).relu()
                .conv(8).relu().pool()
                .conv(16).relu()
                .conv(16).relu().pool()
                .conv(32).relu().pool()
                .build(),
            // mini-vgg with a batch-norm after each conv; otherwise identical.
            ZooEntry::MiniVggBn => SpecBuilder::new()
                .conv(8).bn().relu()
                .conv(8).bn().relu().pool()
                .conv(16).bn().relu()
                .conv(16).bn().relu().pool()
                .conv(32).bn().relu().pool()
                .build(),
            ZooEntry::MiniCnnWide => SpecBuilder::new()
                .conv(16).relu().pool()
                .conv(32).relu().pool()
                .conv(48).relu()
                .conv(48).relu()
                .conv(48).relu().pool()
                .build(),
            // Back-to-back convs give multi-layer blocks between delimiters.
            ZooEntry::MiniCnnDeep => SpecBuilder::new()
                .conv(8).relu()
                .conv(8)
                .conv(8).relu().pool()
                .conv(16).relu()
                .conv(16)
                .conv(16).relu().pool()
                .conv(24).relu().pool()
                .build(),
            ZooEntry::MiniCnnPool => SpecBuilder::new()
                .conv(8).relu().pool()
                .conv(16).relu().pool()
                .conv(24).relu().pool()
                .conv(32).relu().pool()
                .conv(32).relu()
                .build(),
        }
    }
}

impl std::fmt::Display for ZooEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

struct SpecBuilder {
    specs: Vec<LayerSpec>,
    conv: usize,
    bn: usize,
    relu: usize,
    pool: usize,
}

impl SpecBuilder {
    fn new() -> SpecBuilder {
        SpecBuilder { specs: Vec::new(), conv: 0, bn: 0, relu: 0, pool: 0 }
    }

    fn conv(mut self, filters: usize) -> Self {
        self.conv += 1;
        self.specs.push(LayerSpec::new(
            LayerKind::Conv2D { filters, kernel: 3, stride: 1, padding: Padding::Same },
            format!("conv{}", self.conv),
        ));
        self
    }

    fn bn(mut self) -> Self {
        self.bn += 1;
        self.specs
            .push(LayerSpec::new(LayerKind::BatchNorm, format!("bn{}", self.bn)));
        self
    }

    fn relu(mut self) -> Self {
        self.relu += 1;
        self.specs.push(LayerSpec::new(
            LayerKind::Activation { f: Activation::Relu },
            format!("relu{}", self.relu),
        ));
        self
    }

    fn pool(mut self) -> Self {
        self.pool += 1;
        self.specs.push(LayerSpec::new(
            LayerKind::MaxPool2D { window: 2, stride: 2 },
            format!("pool{}", self.pool),
        ));
        self
    }

    fn build(self) -> Vec<LayerSpec> {
        self.specs
    }
}

/// Builds an initialized, headless backbone. The same entry and seed always
/// produce identical parameters.
pub fn build_backbone(entry: ZooEntry, input_shape: &[usize], seed: u64) -> Result<SequentialModel> {
    if input_shape.len() != 3 {
        return Err(Error::config(format!(
            "backbones expect [H, W, C] input, got {input_shape:?}"
        )));
    }
    let mut rng = seeded(derive_seed(seed, "backbone-init"));
    SequentialModel::from_specs(entry.backbone_specs(), input_shape, &mut rng)
}
