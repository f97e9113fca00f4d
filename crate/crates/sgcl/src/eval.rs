//! Linear-probe evaluation: stratified splits and a full-batch logistic
//! regression trained on frozen (unpacked) binary embeddings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BinaryMatrix;
use crate::error::{Result, SgclError};
use crate::nd::DenseMatrix;

pub const PROBE_EPOCHS: usize = 300;
pub const PROBE_LR: f32 = 0.1;
pub const PROBE_L2: f32 = 1e-4;

#[derive(Debug, Clone)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

fn split_counts(n: usize, ratios: (f64, f64, f64)) -> (usize, usize) {
    let n_train = (n as f64 * ratios.0).round() as usize;
    let n_val = ((n as f64 * ratios.1).round() as usize).min(n - n_train);
    (n_train, n_val)
}

/// Deterministic split of node indices, optionally stratified by label so
/// each split keeps per-class proportions within one node.
pub fn make_split(
    labels: &[usize],
    ratios: (f64, f64, f64),
    stratified: bool,
    seed: u64,
) -> Result<Split> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 || ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(SgclError::Config(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train_idx: Vec::new(),
        val_idx: Vec::new(),
        test_idx: Vec::new(),
    };
    if stratified {
        let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let active_splits =
            [ratios.0, ratios.1, ratios.2].iter().filter(|&&r| r > 0.0).count();
        for c in 0..num_classes {
            let mut idx: Vec<usize> =
                (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if !idx.is_empty() && idx.len() < active_splits {
                return Err(SgclError::Data(format!(
                    "class {c} has only {} nodes for {active_splits} splits",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            let (n_train, n_val) = split_counts(idx.len(), ratios);
            split.train_idx.extend(&idx[..n_train]);
            split.val_idx.extend(&idx[n_train..n_train + n_val]);
            split.test_idx.extend(&idx[n_train + n_val..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        let (n_train, n_val) = split_counts(idx.len(), ratios);
        split.train_idx.extend(&idx[..n_train]);
        split.val_idx.extend(&idx[n_train..n_train + n_val]);
        split.test_idx.extend(&idx[n_train + n_val..]);
    }
    Ok(split)
}

#[derive(Debug, Clone)]
pub struct ProbeModel {
    pub weights: DenseMatrix,
    pub bias: Vec<f32>,
    pub classes: usize,
}

fn softmax_row(logits: &mut [f32]) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

fn logits_for(model: &ProbeModel, x: &DenseMatrix, row: usize) -> Vec<f32> {
    let f = x.cols;
    let c = model.classes;
    let mut out = model.bias.clone();
    for j in 0..f {
        let v = x[(row, j)];
        if v == 0.0 {
            continue;
        }
        for (o, k) in out.iter_mut().zip(0..c) {
            *o += v * model.weights[(j, k)];
        }
    }
    out
}

/// Multinomial logistic regression by full-batch gradient descent with
/// softmax cross-entropy and L2 penalty; weights start at zero so the run
/// is deterministic without any RNG.
pub fn train_probe(
    z: &BinaryMatrix,
    labels: &[usize],
    split: &Split,
    epochs: usize,
    lr: f32,
    l2: f32,
) -> Result<ProbeModel> {
    if labels.len() != z.rows {
        return Err(SgclError::Dimension(format!(
            "train_probe: {} labels for {} rows",
            labels.len(),
            z.rows
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let train = &split.train_idx;
    if train.is_empty() {
        return Err(SgclError::Data("empty training split".into()));
    }
    let distinct: std::collections::BTreeSet<usize> =
        train.iter().map(|&i| labels[i]).collect();
    if distinct.len() < 2 {
        return Err(SgclError::Data(
            "training split contains a single class".into(),
        ));
    }
    let x = z.to_dense();
    let f = x.cols;
    let mut model = ProbeModel {
        weights: DenseMatrix::zeros(f, classes),
        bias: vec![0.0; classes],
        classes,
    };
    let m = train.len() as f32;
    for _ in 0..epochs {
        let mut dw = DenseMatrix::zeros(f, classes);
        let mut db = vec![0.0f32; classes];
        for &i in train {
            let mut p = logits_for(&model, &x, i);
            softmax_row(&mut p);
            p[labels[i]] -= 1.0;
            for (k, &g) in p.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                db[k] += g;
                for j in x.row_set_cols(i) {
                    dw[(j, k)] += g;
                }
            }
        }
        for j in 0..f {
            for k in 0..classes {
                let g = dw[(j, k)] / m + l2 * model.weights[(j, k)];
                model.weights[(j, k)] -= lr * g;
            }
        }
        for k in 0..classes {
            model.bias[k] -= lr * db[k] / m;
        }
    }
    if !model.weights.all_finite() {
        return Err(SgclError::Numeric("probe weights diverged".into()));
    }
    Ok(model)
}

trait BinaryRowCols {
    fn row_set_cols(&self, row: usize) -> Vec<usize>;
}

impl BinaryRowCols for DenseMatrix {
    fn row_set_cols(&self, row: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self[(row, c)] != 0.0).collect()
    }
}

/// Argmax-match fraction over the index set; ties resolve to the lowest
/// class index.
pub fn accuracy(model: &ProbeModel, z: &BinaryMatrix, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let x = z.to_dense();
    let mut correct = 0usize;
    for &i in idx {
        let logits = logits_for(model, &x, i);
        let mut best = 0usize;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / idx.len() as f64
}

/// Mean and sample standard deviation across trial accuracies.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
