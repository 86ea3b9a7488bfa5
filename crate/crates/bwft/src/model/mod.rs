//! Sequential models: named layers, freeze masks, the classifier head, and
//! parameter accounting.

mod snapshot;
mod zoo;

pub use snapshot::{Provenance, Snapshot};
pub use zoo::{build_backbone, ZooEntry};

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layer::{Activation, Layer, LayerKind, LayerSpec, Mode};
use crate::rng::{derive_seed, seeded, RunRng};
use crate::tensor::Tensor;

/// Units of the classifier head appended by [`SequentialModel::attach_classifier`].
pub const HEAD_DENSE1_UNITS: usize = 128;
pub const HEAD_DROPOUT_RATE: f32 = 0.5;
pub const HEAD_DENSE2_UNITS: usize = 64;

#[derive(Debug, Clone)]
pub struct SequentialModel {
    layers: Vec<Layer>,
    trainable: Vec<bool>,
    input_shape: Vec<usize>,
    head_boundary: Option<usize>,
}

impl SequentialModel {
    /// Builds a model from specs, chaining shapes and initializing parameters.
    pub fn from_specs(specs: Vec<LayerSpec>, input_shape: &[usize], rng: &mut RunRng) -> Result<SequentialModel> {
        let mut names = HashSet::new();
        for spec in &specs {
            if !names.insert(spec.name.clone()) {
                return Err(Error::config(format!("duplicate layer name {}", spec.name)));
            }
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape.to_vec();
        for spec in specs {
            let layer = Layer::new(spec, &shape, rng)?;
            shape = layer.out_shape().to_vec();
            layers.push(layer);
        }
        let trainable = vec![true; layers.len()];
        Ok(SequentialModel {
            layers,
            trainable,
            input_shape: input_shape.to_vec(),
            head_boundary: None,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().map(|l| l.out_shape()).unwrap_or(&self.input_shape)
    }

    pub fn head_boundary(&self) -> Option<usize> {
        self.head_boundary
    }

    /// Index one past the last backbone layer.
    pub fn backbone_len(&self) -> usize {
        self.head_boundary.unwrap_or(self.layers.len())
    }

    /// Indices of weighted layers in the backbone, in layer order.
    pub fn weighted_backbone_indices(&self) -> Vec<usize> {
        (0..self.backbone_len()).filter(|&i| self.layers[i].weighted()).collect()
    }

    pub fn is_trainable(&self, index: usize) -> bool {
        self.trainable[index]
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name() == name)
    }

    /// Appends the classifier head: Flatten, Dense(128), Dropout(0.5),
    /// Dense(64)+relu, Dense(num_classes)+softmax. The head boundary is the
    /// Flatten index.
    pub fn attach_classifier(&mut self, num_classes: usize, rng: &mut RunRng) -> Result<()> {
        if self.head_boundary.is_some() {
            return Err(Error::config("classifier head already attached"));
        }
        if num_classes == 0 {
            return Err(Error::config("num_classes must be positive"));
        }
        let boundary = self.layers.len();
        let specs = [
            LayerSpec::new(LayerKind::Flatten, "head_flatten"),
            LayerSpec::new(LayerKind::Dense { units: HEAD_DENSE1_UNITS }, "head_dense1"),
            LayerSpec::new(LayerKind::Dropout { rate: HEAD_DROPOUT_RATE }, "head_dropout"),
            LayerSpec::new(LayerKind::Dense { units: HEAD_DENSE2_UNITS }, "head_dense2"),
            LayerSpec::new(LayerKind::Activation { f: Activation::Relu }, "head_relu"),
            LayerSpec::new(LayerKind::Dense { units: num_classes }, "head_output"),
            LayerSpec::new(LayerKind::Activation { f: Activation::Softmax }, "head_softmax"),
        ];
        let mut shape = self.output_shape().to_vec();
        for spec in specs {
            if self.layer_index(&spec.name).is_some() {
                return Err(Error::config(format!("layer name {} already taken", spec.name)));
            }
            let layer = Layer::new(spec, &shape, rng)?;
            shape = layer.out_shape().to_vec();
            self.layers.push(layer);
            self.trainable.push(true);
        }
        self.head_boundary = Some(boundary);
        Ok(())
    }

    /// Removes the head again, e.g. after pre-training on a temporary task.
    pub fn strip_head(&mut self) -> Result<()> {
        let boundary = self
            .head_boundary
            .take()
            .ok_or_else(|| Error::usage("no head to strip"))?;
        self.layers.truncate(boundary);
        self.trainable.truncate(boundary);
        Ok(())
    }

    /// Marks exactly `unit` ∪ the weighted head layers trainable; every other
    /// weighted layer is frozen. `unit` holds backbone layer indices and must
    /// point at weighted layers.
    pub fn set_trainable(&mut self, unit: &[usize]) -> Result<()> {
        let boundary = self
            .head_boundary
            .ok_or_else(|| Error::usage("attach a head before setting the trainable unit"))?;
        for &i in unit {
            if i >= boundary {
                return Err(Error::config(format!(
                    "unit index {i} outside the backbone (head starts at {boundary})"
                )));
            }
            if !self.layers[i].weighted() {
                return Err(Error::config(format!(
                    "unit index {i} ({}) is not a weighted layer",
                    self.layers[i].name()
                )));
            }
        }
        for i in 0..self.layers.len() {
            self.trainable[i] = i >= boundary || unit.contains(&i);
        }
        Ok(())
    }

    /// Per-layer trainable parameter counts, `(name, count)`, in layer order.
    pub fn count_params(&self) -> Vec<(String, usize)> {
        self.layers
            .iter()
            .map(|l| (l.name().to_string(), l.param_count()))
            .collect()
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Stable hash of the architecture (input shape plus layer descriptors).
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(format!("in:{:?}", self.input_shape));
        for layer in &self.layers {
            hasher.update(layer.spec().descriptor());
            hasher.update([0u8]);
        }
        hasher.finalize().into()
    }

    /// All parameter and buffer tensors as `(qualified_name, tensor)` pairs,
    /// in a stable order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for (pname, p) in layer.params() {
                out.push((format!("{}.{}", layer.name(), pname), &p.value));
            }
            for (bname, b) in layer.buffers() {
                out.push((format!("{}.{}", layer.name(), bname), b));
            }
        }
        out
    }

    pub(crate) fn load_named_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let mut iter = tensors.iter();
        for layer in &mut self.layers {
            let name = layer.name().to_string();
            for (pname, p) in layer.params_mut() {
                let (got_name, t) = iter
                    .next()
                    .ok_or_else(|| Error::config("snapshot has too few tensors"))?;
                let want = format!("{name}.{pname}");
                if got_name != &want || t.shape() != p.value.shape() {
                    return Err(Error::config(format!(
                        "snapshot tensor mismatch: expected {want} {:?}, got {got_name} {:?}",
                        p.value.shape(),
                        t.shape()
                    )));
                }
                p.value = t.clone();
            }
            for (bname, b) in layer.buffers_mut() {
                let (got_name, t) = iter
                    .next()
                    .ok_or_else(|| Error::config("snapshot has too few tensors"))?;
                let want = format!("{name}.{bname}");
                if got_name != &want || t.shape() != b.shape() {
                    return Err(Error::config(format!("snapshot tensor mismatch at {want}")));
                }
                *b = t.clone();
            }
        }
        if iter.next().is_some() {
            return Err(Error::config("snapshot has extra tensors"));
        }
        Ok(())
    }

    /// Train-mode forward pass; arms every layer's backward cache.
    pub fn forward_train(&mut self, input: &Tensor, rng: &mut RunRng) -> Result<Tensor> {
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            let trainable = self.trainable[i];
            x = self.layers[i].forward(&x, Mode::Train, trainable, rng)?;
        }
        Ok(x)
    }

    /// Eval-mode forward pass: deterministic, touches no state.
    pub fn forward_eval(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut rng = seeded(0); // never consumed in eval mode
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            let trainable = self.trainable[i];
            x = self.layers[i].forward(&x, Mode::Eval, trainable, &mut rng)?;
        }
        Ok(x)
    }

    /// Backpropagates the fused softmax+cross-entropy gradient (the gradient
    /// with respect to the final dense layer's logits), skipping the terminal
    /// softmax activation.
    pub fn backward_fused(&mut self, logits_grad: &Tensor) -> Result<()> {
        let last = self.layers.len().saturating_sub(1);
        match self.layers.last().map(|l| &l.spec().kind) {
            Some(LayerKind::Activation { f: Activation::Softmax }) => {}
            _ => {
                return Err(Error::usage(
                    "fused backward requires a terminal softmax activation",
                ))
            }
        }
        let mut grad = logits_grad.clone();
        for i in (0..last).rev() {
            grad = self.layers[i].backward(&grad)?;
        }
        Ok(())
    }

    /// Mutable layer access, e.g. for optimizer steps or test setups.
    /// Structural edits go through the dedicated methods above.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }
}

/// Derives the RNG used to initialize a freshly attached head.
pub fn head_rng(run_seed: u64) -> RunRng {
    seeded(derive_seed(run_seed, "head-init"))
}

/// Accuracy a pre-trained model must exceed on its source task.
pub const PRETRAIN_ACCURACY_GATE: f32 = 0.5;

#[derive(Debug, Clone)]
pub struct PretrainReport {
    /// The restart point for every candidate run: the headless backbone.
    pub snapshot: Snapshot,
    /// Backbone plus the trained temporary head, for exact reproduction of
    /// the recorded source accuracy.
    pub full_snapshot: Snapshot,
    pub source_accuracy: f32,
}

/// Trains all layers of a headless backbone on the source task behind a
/// temporary classifier head, checks the accuracy gate, strips the head, and
/// returns the backbone snapshot.
pub fn pretrain(
    mut model: SequentialModel,
    source: &crate::dataset::LabeledDataset,
    config: &crate::engine::TrainConfig,
) -> Result<PretrainReport> {
    if model.head_boundary().is_some() {
        return Err(Error::usage("pretrain expects a headless backbone"));
    }
    model.attach_classifier(source.num_classes(), &mut head_rng(config.seed))?;
    let all_weighted = model.weighted_backbone_indices();
    model.set_trainable(&all_weighted)?;
    crate::engine::train_for_pretrain(&mut model, source, config)?;
    let source_accuracy = crate::engine::evaluate(&mut model, source)?;
    if source_accuracy <= PRETRAIN_ACCURACY_GATE {
        return Err(Error::PretrainGate {
            accuracy: source_accuracy,
            gate: PRETRAIN_ACCURACY_GATE,
        });
    }
    let provenance = Provenance { seed: config.seed, config_digest: config.digest() };
    let full_snapshot = Snapshot::capture(&model, provenance.clone());
    model.strip_head()?;
    let snapshot = Snapshot::capture(&model, provenance);
    Ok(PretrainReport { snapshot, full_snapshot, source_accuracy })
}
