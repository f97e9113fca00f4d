//! Peer-GCN spiking encoder: feature grouping into T steps, per-step
//! message passing with shared deeper layers, spike emission and
//! bit-packed pooled embeddings.

use rand_chacha::ChaCha8Rng;

use crate::bits::BinaryMatrix;
use crate::error::{Result, SgclError};
use crate::graph::{CsrGraph, NormCoeffs};
use crate::nd::{linear, linear_backward, relu, relu_backward, spmm, DenseMatrix, ParamTensor};
use crate::neuron::{raw_from_tau, tau_from_raw, NeuronConfig, NeuronState, NeuronStepTrace};

/// Column widths of the T feature groups: d/T uniformly when T divides d,
/// otherwise d//T for the first T-1 groups and d mod T for the last.
pub fn group_widths(d: usize, t_steps: usize) -> Result<Vec<usize>> {
    if t_steps == 0 {
        return Err(SgclError::Config("t_steps must be >= 1".into()));
    }
    if t_steps > d {
        return Err(SgclError::Config(format!(
            "t_steps {t_steps} exceeds feature dimension {d} (empty group)"
        )));
    }
    if d % t_steps == 0 {
        return Ok(vec![d / t_steps; t_steps]);
    }
    let mut widths = vec![d / t_steps; t_steps - 1];
    widths.push(d % t_steps);
    Ok(widths)
}

/// Non-overlapping contiguous column blocks of the feature matrix.
#[derive(Debug, Clone)]
pub struct FeatureGroups {
    pub groups: Vec<DenseMatrix>,
}

pub fn partition_features(x: &DenseMatrix, t_steps: usize) -> Result<FeatureGroups> {
    let widths = group_widths(x.cols, t_steps)?;
    let mut groups = Vec::with_capacity(t_steps);
    let mut start = 0;
    for w in widths {
        groups.push(x.column_slice(start, w));
        start += w;
    }
    Ok(FeatureGroups { groups })
}

/// Encoder parameters: one first-layer weight per time step, L-1 deeper
/// layers shared across steps, and a single spiking neuron whose learnable
/// time constant (PLIF) is shared across steps as well.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub first_w: Vec<ParamTensor>,
    pub first_b: Vec<ParamTensor>,
    pub shared: Vec<ParamTensor>,
    /// Unconstrained scalar behind softplus; effective tau stays positive.
    pub tau_raw: ParamTensor,
    pub neuron: NeuronConfig,
    pub depth: usize,
    pub hidden: usize,
}

impl EncoderParams {
    pub fn init(
        feature_dim: usize,
        t_steps: usize,
        hidden: usize,
        depth: usize,
        neuron: NeuronConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(SgclError::Config("depth must be >= 1".into()));
        }
        let widths = group_widths(feature_dim, t_steps)?;
        let first_w = widths
            .iter()
            .map(|&w| ParamTensor::gaussian_init(w, hidden, rng))
            .collect();
        let first_b = widths.iter().map(|_| ParamTensor::zeros(1, hidden)).collect();
        let shared = (1..depth)
            .map(|_| ParamTensor::gaussian_init(hidden, hidden, rng))
            .collect();
        let tau_raw = ParamTensor::new(
            DenseMatrix::from_vec(1, 1, vec![raw_from_tau(neuron.tau_m)]).unwrap(),
        );
        Ok(EncoderParams {
            first_w,
            first_b,
            shared,
            tau_raw,
            neuron,
            depth,
            hidden,
        })
    }

    pub fn t_steps(&self) -> usize {
        self.first_w.len()
    }

    pub fn effective_tau(&self) -> f32 {
        tau_from_raw(self.tau_raw.value.data[0])
    }

    pub fn new_state(&self, num_nodes: usize) -> NeuronState {
        let mut state = NeuronState::new(num_nodes, self.hidden, self.neuron);
        state.tau = self.effective_tau();
        state
    }
}

/// Forward record of one encoder step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderStepTrace {
    pub step: usize,
    /// Input feature group.
    pub x_in: DenseMatrix,
    /// Aggregated inputs u_l feeding each deeper layer's weight multiply.
    pub deeper_in: Vec<DenseMatrix>,
    /// Pre-activation outputs per layer (relu applied to all but the last).
    pub layer_pre: Vec<DenseMatrix>,
    pub neuron: NeuronStepTrace,
}

/// One time step of the encoder: GCN over the feature group, then a spike
/// emission through the shared neuron. The final layer carries no relu so
/// the neuron receives signed currents.
pub fn encode_step(
    g: &CsrGraph,
    coeffs: &NormCoeffs,
    group: &DenseMatrix,
    params: &EncoderParams,
    t: usize,
    state: &mut NeuronState,
) -> Result<(BinaryMatrix, DenseMatrix, EncoderStepTrace)> {
    let depth = params.depth;
    let w1 = &params.first_w[t];
    let b1 = &params.first_b[t];
    if group.cols != w1.value.rows {
        return Err(SgclError::Dimension(format!(
            "encode_step: group width {} vs first-layer weight rows {}",
            group.cols, w1.value.rows
        )));
    }
    let u1 = linear(group, &w1.value, &b1.value)?;
    let z1 = spmm(coeffs, g, &u1)?;
    let mut layer_pre = vec![z1.clone()];
    let mut h = if depth > 1 { relu(&z1) } else { z1 };
    let mut deeper_in = Vec::with_capacity(depth.saturating_sub(1));
    for (l, w) in params.shared.iter().enumerate() {
        let u = spmm(coeffs, g, &h)?;
        let z = u.matmul(&w.value)?;
        deeper_in.push(u);
        layer_pre.push(z.clone());
        let is_last = l + 2 == depth;
        h = if is_last { z } else { relu(&z) };
    }
    let (spikes, ntrace) = crate::neuron::neuron_step(state, &h)?;
    Ok((
        spikes,
        h,
        EncoderStepTrace {
            step: t,
            x_in: group.clone(),
            deeper_in,
            layer_pre,
            neuron: ntrace,
        },
    ))
}

/// Backward through one encoder step given the gradient w.r.t. the hidden
/// output H^t. Accumulates into the step's first-layer grads and the shared
/// weights' grads.
pub fn encode_backward(
    g: &CsrGraph,
    coeffs: &NormCoeffs,
    params: &mut EncoderParams,
    trace: &EncoderStepTrace,
    d_hidden: &DenseMatrix,
) -> Result<()> {
    let depth = params.depth;
    let mut d = d_hidden.clone();
    for l in (2..=depth).rev() {
        if l < depth {
            d = relu_backward(&trace.layer_pre[l - 1], &d);
        }
        let u = &trace.deeper_in[l - 2];
        let w = &mut params.shared[l - 2];
        let dw = u.t_matmul(&d)?;
        w.grad.add_assign(&dw);
        let du = d.matmul_t(&w.value)?;
        d = spmm(coeffs, g, &du)?;
    }
    if depth > 1 {
        d = relu_backward(&trace.layer_pre[0], &d);
    }
    let du1 = spmm(coeffs, g, &d)?;
    let (dw1, db1, _) = linear_backward(&trace.x_in, &params.first_w[trace.step].value, &du1)?;
    params.first_w[trace.step].grad.add_assign(&dw1);
    params.first_b[trace.step].grad.add_assign(&db1);
    Ok(())
}

/// T bit-packed spike matrices; the learned representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub steps: Vec<BinaryMatrix>,
}

impl SpikeTrain {
    pub fn t_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn width(&self) -> usize {
        self.steps.first().map_or(0, |s| s.cols)
    }

    pub fn num_nodes(&self) -> usize {
        self.steps.first().map_or(0, |s| s.rows)
    }
}

/// Z = (S^1 || ... || S^T), bit-packed, logical width T*k.
pub fn concat_pool(train: &SpikeTrain) -> BinaryMatrix {
    let n = train.num_nodes();
    let k = train.width();
    let mut z = BinaryMatrix::zeros(n, train.t_steps() * k);
    for (t, s) in train.steps.iter().enumerate() {
        for r in 0..n {
            for c in s.row_set_bits(r) {
                z.set(r, t * k + c, true);
            }
        }
    }
    z
}

/// Elementwise mean of the T spike matrices; entries in [0, 1].
pub fn firing_rate(train: &SpikeTrain) -> DenseMatrix {
    let n = train.num_nodes();
    let k = train.width();
    let mut rate = DenseMatrix::zeros(n, k);
    for s in &train.steps {
        for r in 0..n {
            for c in s.row_set_bits(r) {
                rate[(r, c)] += 1.0;
            }
        }
    }
    rate.scale(1.0 / train.t_steps() as f32);
    rate
}

/// Runs the full T-step encoder over clean features and returns the spike
/// train (inference path; no traces kept).
pub fn encode_all(
    g: &CsrGraph,
    coeffs: &NormCoeffs,
    params: &EncoderParams,
) -> Result<SpikeTrain> {
    let groups = partition_features(&g.features, params.t_steps())?;
    let mut state = params.new_state(g.num_nodes);
    let mut steps = Vec::with_capacity(params.t_steps());
    for (t, group) in groups.groups.iter().enumerate() {
        let (spikes, _, _) = encode_step(g, coeffs, group, params, t, &mut state)?;
        steps.push(spikes);
    }
    Ok(SpikeTrain { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sym_norm_coeffs;
    use rand::SeedableRng;

    #[test]
    fn partition_even_split() {
        let x = DenseMatrix::zeros(3, 6);
        let fg = partition_features(&x, 3).unwrap();
        let widths: Vec<usize> = fg.groups.iter().map(|g| g.cols).collect();
        assert_eq!(widths, vec![2, 2, 2]);
    }

    #[test]
    fn partition_uneven_split() {
        let x = DenseMatrix::zeros(3, 7);
        let fg = partition_features(&x, 3).unwrap();
        let widths: Vec<usize> = fg.groups.iter().map(|g| g.cols).collect();
        assert_eq!(widths, vec![2, 2, 1]);
    }

    #[test]
    fn partition_single_group_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DenseMatrix::gaussian(4, 5, 1.0, &mut rng);
        let fg = partition_features(&x, 1).unwrap();
        assert_eq!(fg.groups.len(), 1);
        assert_eq!(fg.groups[0], x);
    }

    #[test]
    fn partition_rejects_oversized_t() {
        let x = DenseMatrix::zeros(2, 3);
        assert!(partition_features(&x, 4).is_err());
    }

    #[test]
    fn concat_identity_when_divisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseMatrix::gaussian(5, 12, 1.0, &mut rng);
        let fg = partition_features(&x, 4).unwrap();
        let mut rebuilt = DenseMatrix::zeros(5, 12);
        let mut start = 0;
        for g in &fg.groups {
            for r in 0..5 {
                for c in 0..g.cols {
                    rebuilt[(r, start + c)] = g[(r, c)];
                }
            }
            start += g.cols;
        }
        assert_eq!(rebuilt, x);
    }

    #[test]
    fn concat_pool_layout() {
        let k = 3;
        let mut ones = BinaryMatrix::zeros(2, k);
        for r in 0..2 {
            for c in 0..k {
                ones.set(r, c, true);
            }
        }
        let zeros = BinaryMatrix::zeros(2, k);
        let train = SpikeTrain {
            steps: vec![ones, zeros],
        };
        let z = concat_pool(&train);
        assert_eq!(z.cols, 2 * k);
        for r in 0..2 {
            for c in 0..k {
                assert!(z.get(r, c));
                assert!(!z.get(r, k + c));
            }
        }
    }

    #[test]
    fn concat_pool_single_step() {
        let mut s = BinaryMatrix::zeros(2, 4);
        s.set(0, 1, true);
        s.set(1, 3, true);
        let train = SpikeTrain {
            steps: vec![s.clone()],
        };
        assert_eq!(concat_pool(&train), s);
    }

    #[test]
    fn firing_rate_counts() {
        let k = 1;
        let mut steps = Vec::new();
        for t in 0..12 {
            let mut s = BinaryMatrix::zeros(1, k);
            if t < 3 {
                s.set(0, 0, true);
            }
            steps.push(s);
        }
        let rate = firing_rate(&SpikeTrain { steps });
        assert!((rate[(0, 0)] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn zero_features_zero_bias_never_fires() {
        let feats = DenseMatrix::zeros(4, 8);
        let g = CsrGraph::from_edges(&[(0, 1), (2, 3)], feats).unwrap();
        let coeffs = sym_norm_coeffs(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params =
            EncoderParams::init(8, 2, 4, 2, NeuronConfig::default(), &mut rng).unwrap();
        let train = encode_all(&g, &coeffs, &params).unwrap();
        for s in &train.steps {
            assert_eq!(s.count_ones(), 0);
        }
    }

    #[test]
    fn single_layer_step_composes_spmm_and_neuron() {
        // 2-node single edge, x = [[1],[0]] -> spmm gives [[0.5],[0.5]];
        // with identity W and V_th 0.4 both nodes fire, V drops to 0.1.
        let feats = DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let g = CsrGraph::from_edges(&[(0, 1)], feats.clone()).unwrap();
        let coeffs = sym_norm_coeffs(&g);
        let neuron = NeuronConfig {
            kind: crate::neuron::NeuronKind::If,
            v_threshold: 0.4,
            ..NeuronConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = EncoderParams::init(1, 1, 1, 1, neuron, &mut rng).unwrap();
        params.first_w[0].value = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut state = params.new_state(2);
        let (spikes, hidden, _) =
            encode_step(&g, &coeffs, &g.features, &params, 0, &mut state).unwrap();
        assert!((hidden.data[0] - 0.5).abs() < 1e-6);
        assert!((hidden.data[1] - 0.5).abs() < 1e-6);
        assert!(spikes.get(0, 0) && spikes.get(1, 0));
        assert!((state.potential.data[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn encode_all_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats = DenseMatrix::gaussian(6, 8, 1.0, &mut rng);
        let g = CsrGraph::from_edges(&[(0, 1), (1, 2), (3, 4), (4, 5)], feats).unwrap();
        let coeffs = sym_norm_coeffs(&g);
        let params =
            EncoderParams::init(8, 4, 3, 2, NeuronConfig::default(), &mut rng).unwrap();
        let a = encode_all(&g, &coeffs, &params).unwrap();
        let b = encode_all(&g, &coeffs, &params).unwrap();
        assert_eq!(a, b);
    }
}
