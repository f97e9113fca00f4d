//! Corrupted views, the masked-summation predictor head, and the margin
//! ranking loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BinaryMatrix;
use crate::error::{Result, SgclError};
use crate::nd::{DenseMatrix, ParamTensor};

/// Single-layer perceptron head scoring binary codes: score = w . z + b.
#[derive(Debug, Clone)]
pub struct PredictorParams {
    pub w: ParamTensor,
    pub b: ParamTensor,
}

impl PredictorParams {
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        PredictorParams {
            w: ParamTensor::gaussian_init(hidden, 1, rng),
            b: ParamTensor::zeros(1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ContrastConfig {
    pub margin: f32,
    pub edge_drop_p: f64,
    pub seed: u64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig {
            margin: 1.0,
            edge_drop_p: 0.5,
            seed: 0,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.margin) {
            return Err(SgclError::Config(format!(
                "margin must be in [0, 2], got {}",
                self.margin
            )));
        }
        if !(0.0..1.0).contains(&self.edge_drop_p) {
            return Err(SgclError::Config(format!(
                "edge_drop_p must be in [0, 1), got {}",
                self.edge_drop_p
            )));
        }
        Ok(())
    }
}

/// Permutes feature columns uniformly at random; returns the permutation.
pub fn shuffle_features(x: &DenseMatrix, seed: u64) -> (DenseMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..x.cols).collect();
    perm.shuffle(&mut rng);
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        for (c, &p) in perm.iter().enumerate() {
            out[(r, c)] = x[(r, p)];
        }
    }
    (out, perm)
}

/// score(u) = sum of w rows selected by set bits, plus b. Binary inputs make
/// this a masked summation; no dense multiply.
pub fn predictor_score(spikes: &BinaryMatrix, p: &PredictorParams) -> Result<Vec<f32>> {
    if spikes.cols != p.w.value.rows {
        return Err(SgclError::Dimension(format!(
            "predictor_score: spike width {} vs predictor width {}",
            spikes.cols,
            p.w.value.rows
        )));
    }
    let b = p.b.value.data[0];
    let w = &p.w.value.data;
    Ok((0..spikes.rows)
        .map(|r| b + spikes.row_set_bits(r).map(|j| w[j]).sum::<f32>())
        .collect())
}

/// Backward of the masked summation. Accumulates dw/db into the predictor
/// grads and returns the gradient w.r.t. the (relaxed) spike inputs.
pub fn predictor_backward(
    spikes: &BinaryMatrix,
    p: &mut PredictorParams,
    upstream: &[f32],
) -> Result<DenseMatrix> {
    if upstream.len() != spikes.rows {
        return Err(SgclError::Dimension(
            "predictor_backward: upstream length mismatch".into(),
        ));
    }
    let k = spikes.cols;
    let mut d_spikes = DenseMatrix::zeros(spikes.rows, k);
    for (r, &up) in upstream.iter().enumerate() {
        if up != 0.0 {
            for j in spikes.row_set_bits(r) {
                p.w.grad.data[j] += up;
            }
            p.b.grad.data[0] += up;
        }
        // dz_uj = up_u * w_j regardless of the bit value
        for j in 0..k {
            d_spikes[(r, j)] = up * p.w.value.data[j];
        }
    }
    Ok(d_spikes)
}

/// Margin ranking loss J = (1/N) sum max(0, pos - neg + m) with hinge
/// subgradients; the kink counts as inactive.
pub fn mrl_loss(pos: &[f32], neg: &[f32], margin: f32) -> (f32, Vec<f32>, Vec<f32>) {
    debug_assert_eq!(pos.len(), neg.len());
    let n = pos.len() as f32;
    let mut loss = 0.0f32;
    let mut d_pos = vec![0.0f32; pos.len()];
    let mut d_neg = vec![0.0f32; neg.len()];
    for i in 0..pos.len() {
        let h = pos[i] - neg[i] + margin;
        if h > 0.0 {
            loss += h;
            d_pos[i] = 1.0 / n;
            d_neg[i] = -1.0 / n;
        }
    }
    (loss / n, d_pos, d_neg)
}
