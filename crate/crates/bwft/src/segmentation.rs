//! Candidate units of adaptation: blocks, sliding windows, and ranked sets.
//!
//! Blocks are maximal runs of weighted backbone layers delimited by
//! non-weighting layers (max-pool, flatten, dropout, activation). Batch-norm
//! carries weights, so by default it joins its neighbours' block; pass
//! `delimit_batchnorm` to treat it as a delimiter instead (delimiting
//! batch-norms are then excluded from every block). Sliding windows move over
//! the weighted layers only, skipping non-weighting layers, since tuning a
//! non-weighting layer is a no-op. Head layers never appear in any unit.

use crate::error::{Error, Result};
use crate::layer::LayerKind;
use crate::model::SequentialModel;

/// A maximal run of weighted layers between delimiters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Ordinal within the partition.
    pub index: usize,
    /// Backbone layer indices, ascending.
    pub layer_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Block>,
}

/// `width` consecutive weighted layers; consecutive windows overlap in
/// `width - 1` layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    /// Ordinal of the window (position of its first weighted layer).
    pub start: usize,
    pub layer_indices: Vec<usize>,
}

pub const DEFAULT_WINDOW_WIDTH: usize = 3;

/// Segments the backbone into blocks at non-weighting layers.
pub fn partition_by_nonweighting(model: &SequentialModel, delimit_batchnorm: bool) -> Result<Partition> {
    let mut blocks = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (i, layer) in model.layers()[..model.backbone_len()].iter().enumerate() {
        let delimits = !layer.weighted()
            || (delimit_batchnorm && layer.spec().kind == LayerKind::BatchNorm);
        if delimits {
            if !current.is_empty() {
                blocks.push(Block { index: blocks.len(), layer_indices: std::mem::take(&mut current) });
            }
        } else {
            current.push(i);
        }
    }
    if !current.is_empty() {
        blocks.push(Block { index: blocks.len(), layer_indices: current });
    }
    if blocks.is_empty() {
        return Err(Error::config("backbone has no weighted layers to partition"));
    }
    Ok(Partition { blocks })
}

/// Enumerates all `n - width + 1` stride-1 windows over the weighted backbone
/// layers.
pub fn sliding_windows(model: &SequentialModel, width: usize) -> Result<Vec<Window>> {
    if width == 0 {
        return Err(Error::config("window width must be positive"));
    }
    let weighted = model.weighted_backbone_indices();
    if weighted.len() < width {
        return Err(Error::config(format!(
            "window width {width} exceeds the {} weighted backbone layers",
            weighted.len()
        )));
    }
    Ok((0..=weighted.len() - width)
        .map(|s| Window { start: s, layer_indices: weighted[s..s + width].to_vec() })
        .collect())
}

/// The `k` layer indices with the highest accuracy; ties break toward the
/// lower layer index (the input end). The result is ordered by layer index.
pub fn rank_layers(acc: &[(usize, f32)], k: usize) -> Result<Vec<usize>> {
    if acc.is_empty() {
        return Err(Error::config("rank_layers needs at least one accuracy"));
    }
    if k == 0 || k > acc.len() {
        return Err(Error::config(format!(
            "k = {k} out of range for {} accuracies",
            acc.len()
        )));
    }
    let mut order: Vec<&(usize, f32)> = acc.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut top: Vec<usize> = order[..k].iter().map(|(i, _)| *i).collect();
    top.sort_unstable();
    Ok(top)
}

/// Deterministic text rendering used by golden-file tests:
/// one `block <i>: <name,name,...>` line per block.
pub fn partition_dump(model: &SequentialModel, partition: &Partition) -> String {
    let mut out = String::new();
    for block in &partition.blocks {
        let names: Vec<&str> = block
            .layer_indices
            .iter()
            .map(|&i| model.layers()[i].name())
            .collect();
        out.push_str(&format!("block {}: {}\n", block.index, names.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{Activation, LayerKind, LayerSpec, Padding};
    use crate::model::{build_backbone, SequentialModel, ZooEntry};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn conv_spec(name: &str) -> LayerSpec {
        LayerSpec::new(
            LayerKind::Conv2D { filters: 2, kernel: 2, stride: 1, padding: Padding::Same },
            name,
        )
    }

    fn model_of(kinds: &str) -> SequentialModel {
        // c = conv, a = relu activation, m = maxpool, b = batchnorm
        let mut specs = Vec::new();
        for (i, ch) in kinds.chars().enumerate() {
            specs.push(match ch {
                'c' => conv_spec(&format!("conv{i}")),
                'a' => LayerSpec::new(LayerKind::Activation { f: Activation::Relu }, format!("relu{i}")),
                'm' => LayerSpec::new(LayerKind::MaxPool2D { window: 2, stride: 2 }, format!("pool{i}")),
                'b' => LayerSpec::new(LayerKind::BatchNorm, format!("bn{i}")),
                other => panic!("unknown kind {other}"),
            });
        }
        SequentialModel::from_specs(specs, &[16, 16, 1], &mut seeded(0)).unwrap()
    }

    fn indices(p: &Partition) -> Vec<Vec<usize>> {
        p.blocks.iter().map(|b| b.layer_indices.clone()).collect()
    }

    #[test]
    fn pools_delimit_runs_of_convs() {
        let m = model_of("ccmcccm");
        let p = partition_by_nonweighting(&m, false).unwrap();
        assert_eq!(indices(&p), vec![vec![0, 1], vec![3, 4, 5]]);
    }

    #[test]
    fn activations_delimit_too() {
        let m = model_of("cacm");
        let p = partition_by_nonweighting(&m, false).unwrap();
        assert_eq!(indices(&p), vec![vec![0], vec![2]]);
    }

    #[test]
    fn batchnorm_joins_its_conv_block_by_default() {
        let m = model_of("cbacbam");
        let p = partition_by_nonweighting(&m, false).unwrap();
        assert_eq!(indices(&p), vec![vec![0, 1], vec![3, 4]]);
    }

    #[test]
    fn batchnorm_can_be_a_delimiter() {
        let m = model_of("cbccba");
        let p = partition_by_nonweighting(&m, true).unwrap();
        assert_eq!(indices(&p), vec![vec![0], vec![2, 3]]);
    }

    #[test]
    fn no_weighted_layers_is_an_error() {
        let m = model_of("am");
        assert!(partition_by_nonweighting(&m, false).is_err());
    }

    #[test]
    fn zoo_partitions_match_committed_tables() {
        let expect: [(ZooEntry, &[&[usize]]); 5] = [
            (ZooEntry::MiniVgg, &[&[0], &[2], &[5], &[7], &[10]]),
            (ZooEntry::MiniVggBn, &[&[0, 1], &[3, 4], &[7, 8], &[10, 11], &[14, 15]]),
            (ZooEntry::MiniCnnWide, &[&[0], &[3], &[6], &[8], &[10]]),
            (ZooEntry::MiniCnnDeep, &[&[0], &[2, 3], &[6], &[8, 9], &[12]]),
            (ZooEntry::MiniCnnPool, &[&[0], &[3], &[6], &[9], &[12]]),
        ];
        for (entry, blocks) in expect {
            let m = build_backbone(entry, &[32, 32, 3], 0).unwrap();
            let p = partition_by_nonweighting(&m, false).unwrap();
            let got = indices(&p);
            let want: Vec<Vec<usize>> = blocks.iter().map(|b| b.to_vec()).collect();
            assert_eq!(got, want, "{entry}");
        }
    }

    #[test]
    fn vgg_bn_with_bn_delimiting_drops_bn_from_blocks() {
        let m = build_backbone(ZooEntry::MiniVggBn, &[32, 32, 3], 0).unwrap();
        let p = partition_by_nonweighting(&m, true).unwrap();
        assert_eq!(indices(&p), vec![vec![0], vec![3], vec![7], vec![10], vec![14]]);
    }

    #[test]
    fn partition_covers_weighted_layers_exactly_for_all_zoo_entries() {
        for entry in ZooEntry::ALL {
            let m = build_backbone(entry, &[32, 32, 3], 0).unwrap();
            let p = partition_by_nonweighting(&m, false).unwrap();
            let mut covered = Vec::new();
            for b in &p.blocks {
                assert!(!b.layer_indices.is_empty());
                covered.extend_from_slice(&b.layer_indices);
            }
            let mut sorted = covered.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), covered.len(), "{entry}: blocks overlap");
            assert_eq!(sorted, m.weighted_backbone_indices(), "{entry}: coverage");
        }
    }

    #[test]
    fn windows_slide_over_weighted_layers_only() {
        let m = model_of("ccacam"); // weighted at 0, 1, 3
        let w = sliding_windows(&m, 2).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].layer_indices, vec![0, 1]);
        assert_eq!(w[1].layer_indices, vec![1, 3]);
    }

    #[test]
    fn window_count_and_membership_for_all_zoo_entries() {
        for entry in ZooEntry::ALL {
            let m = build_backbone(entry, &[32, 32, 3], 0).unwrap();
            let weighted = m.weighted_backbone_indices();
            let n = weighted.len();
            let width = DEFAULT_WINDOW_WIDTH;
            let ws = sliding_windows(&m, width).unwrap();
            assert_eq!(ws.len(), n - width + 1, "{entry}");
            for &layer in &weighted {
                let appearances = ws
                    .iter()
                    .filter(|w| w.layer_indices.contains(&layer))
                    .count();
                assert!(appearances >= 1 && appearances <= width, "{entry} layer {layer}");
            }
            for pair in ws.windows(2) {
                let overlap = pair[0]
                    .layer_indices
                    .iter()
                    .filter(|i| pair[1].layer_indices.contains(i))
                    .count();
                assert_eq!(overlap, width - 1, "{entry}: consecutive window overlap");
            }
        }
    }

    #[test]
    fn degenerate_windows() {
        let m = model_of("ccc");
        assert_eq!(sliding_windows(&m, 3).unwrap().len(), 1);
        let w1 = sliding_windows(&m, 1).unwrap();
        assert_eq!(w1.len(), 3);
        for (i, w) in w1.iter().enumerate() {
            assert_eq!(w.layer_indices, vec![i]);
        }
        assert!(sliding_windows(&m, 4).is_err());
    }

    #[test]
    fn rank_layers_examples() {
        let acc = [(0, 0.2), (1, 0.9), (2, 0.5), (3, 0.7)];
        assert_eq!(rank_layers(&acc, 3).unwrap(), vec![1, 2, 3]);
        let ties = [(0, 0.5), (1, 0.5), (2, 0.5)];
        assert_eq!(rank_layers(&ties, 2).unwrap(), vec![0, 1]);
        assert_eq!(rank_layers(&acc, 4).unwrap(), vec![0, 1, 2, 3]);
        assert!(rank_layers(&acc, 5).is_err());
        assert!(rank_layers(&[], 1).is_err());
    }

    #[test]
    fn no_head_layer_in_any_unit() {
        for entry in ZooEntry::ALL {
            let mut m = build_backbone(entry, &[32, 32, 3], 0).unwrap();
            m.attach_classifier(5, &mut seeded(1)).unwrap();
            let boundary = m.head_boundary().unwrap();
            let p = partition_by_nonweighting(&m, false).unwrap();
            for b in &p.blocks {
                assert!(b.layer_indices.iter().all(|&i| i < boundary));
            }
            for w in sliding_windows(&m, DEFAULT_WINDOW_WIDTH).unwrap() {
                assert!(w.layer_indices.iter().all(|&i| i < boundary));
            }
        }
    }

    #[test]
    fn dump_format_is_stable() {
        let m = model_of("ccmca");
        let p = partition_by_nonweighting(&m, false).unwrap();
        assert_eq!(partition_dump(&m, &p), "block 0: conv0,conv1\nblock 1: conv3\n");
    }

    proptest! {
        #[test]
        fn rank_layers_matches_sort_oracle(accs in proptest::collection::vec(0.0f32..1.0, 1..20), k_frac in 0.0f32..1.0) {
            let acc: Vec<(usize, f32)> = accs.iter().copied().enumerate().collect();
            let k = ((k_frac * acc.len() as f32) as usize).clamp(1, acc.len());
            let got = rank_layers(&acc, k).unwrap();

            // Oracle: sort by (accuracy desc, index asc), take k, sort by index.
            let mut oracle: Vec<(usize, f32)> = acc.clone();
            oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut want: Vec<usize> = oracle[..k].iter().map(|(i, _)| *i).collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }
}
