//! Labeled image datasets: container, preprocessing, and stratified splits.

mod io;
mod synth;

pub use synth::{generate, ShiftKind, SyntheticTaskSpec};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::loss::one_hot;
use crate::rng::{derive_seed, seeded};
use crate::tensor::Tensor;

/// Images in `[0,1]` with class labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    /// `len * height * width * channels` values, sample-major.
    images: Vec<f32>,
    labels: Vec<u16>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        num_classes: usize,
        images: Vec<f32>,
        labels: Vec<u16>,
        class_names: Vec<String>,
    ) -> Result<LabeledDataset> {
        let sample = height * width * channels;
        if sample == 0 || num_classes == 0 {
            return Err(Error::config("dataset dimensions must be positive"));
        }
        if images.len() != labels.len() * sample {
            return Err(Error::config(format!(
                "image buffer holds {} values, expected {} for {} samples",
                images.len(),
                labels.len() * sample,
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l as usize >= num_classes) {
            return Err(Error::config("label out of range"));
        }
        if images.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("pixel values must lie in [0,1]; run preprocess first"));
        }
        if class_names.len() != num_classes {
            return Err(Error::config("one class name per class required"));
        }
        Ok(LabeledDataset {
            height,
            width,
            channels,
            num_classes,
            images,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn image(&self, index: usize) -> &[f32] {
        let sample = self.height * self.width * self.channels;
        &self.images[index * sample..(index + 1) * sample]
    }

    /// Gathers the given samples into a `[n, H, W, C]` batch tensor and the
    /// matching one-hot target tensor.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let sample = self.height * self.width * self.channels;
        let mut data = Vec::with_capacity(indices.len() * sample);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        let x = Tensor::from_vec(&[indices.len(), self.height, self.width, self.channels], data)
            .expect("batch shape is consistent");
        (x, one_hot(&labels, self.num_classes))
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let sample = self.height * self.width * self.channels;
        let mut images = Vec::with_capacity(indices.len() * sample);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            height: self.height,
            width: self.width,
            channels: self.channels,
            num_classes: self.num_classes,
            images,
            labels,
            class_names: self.class_names.clone(),
        }
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Rescales integer-valued pixels in `[0,255]` to `[0,1]` by dividing by 255.
///
/// Inputs must be integral: re-running preprocess on already-scaled data is
/// rejected by this range/integrality check rather than silently shrinking it.
pub fn preprocess(raw: &[f32]) -> Result<Vec<f32>> {
    for (i, &v) in raw.iter().enumerate() {
        if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
            return Err(Error::config(format!(
                "pixel {i} = {v} is not an integer in [0,255]; already preprocessed?"
            )));
        }
    }
    Ok(raw.iter().map(|v| v / 255.0).collect())
}

/// How to carve a dataset into train/test plus the small search subset.
///
/// `search_fraction` is relative to the whole dataset but drawn from the train
/// split, so the search subset is always a subset of the training data and
/// disjoint from the test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub search_fraction: f64,
    pub test_fraction: f64,
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            search_fraction: 0.10,
            test_fraction: 0.30,
            train_fraction: 0.70,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if (self.test_fraction + self.train_fraction - 1.0).abs() > 1e-9 {
            return Err(Error::config("test_fraction + train_fraction must equal 1"));
        }
        if !(0.0..1.0).contains(&self.search_fraction)
            || !(0.0..1.0).contains(&self.test_fraction)
        {
            return Err(Error::config("fractions must lie in [0,1)"));
        }
        if self.search_fraction > self.train_fraction {
            return Err(Error::config("search subset cannot exceed the train split"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DataSplits {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub search: LabeledDataset,
}

/// Splits into train/test and draws the search subset from the train split.
/// Stratified by class and deterministic under the spec seed.
pub fn split(data: &LabeledDataset, spec: &SplitSpec) -> Result<DataSplits> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::config("cannot split an empty dataset"));
    }
    let mut rng = seeded(derive_seed(spec.seed, "split"));

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut g = vec![Vec::new(); data.num_classes()];
        for (i, &l) in data.labels().iter().enumerate() {
            g[l as usize].push(i);
        }
        g
    } else {
        vec![(0..data.len()).collect()]
    };

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    let mut search_idx = Vec::new();
    for mut group in groups {
        if group.is_empty() {
            continue;
        }
        group.shuffle(&mut rng);
        let n = group.len();
        let n_test = (spec.test_fraction * n as f64).round() as usize;
        let n_search = (spec.search_fraction * n as f64).round() as usize;
        let n_train = n - n_test;
        if n_test == 0 || n_train == 0 || (spec.search_fraction > 0.0 && n_search == 0) {
            return Err(Error::config(format!(
                "a class with {n} samples is too small for fractions {:?}/{:?}/{:?}",
                spec.train_fraction, spec.test_fraction, spec.search_fraction
            )));
        }
        if n_search > n_train {
            return Err(Error::config("search subset exceeds the train split for a class"));
        }
        test_idx.extend_from_slice(&group[..n_test]);
        train_idx.extend_from_slice(&group[n_test..]);
        search_idx.extend_from_slice(&group[n_test..n_test + n_search]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    search_idx.sort_unstable();

    Ok(DataSplits {
        train: data.subset(&train_idx),
        test: data.subset(&test_idx),
        search: data.subset(&search_idx),
    })
}
