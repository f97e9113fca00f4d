//! Oracle GCN, the constructive approximation SNN, and empirical checks of
//! the firing-rate approximation bound and the potential-reduction identity.

use rand_chacha::ChaCha8Rng;

use crate::encoder::{group_widths, partition_features, EncoderParams};
use crate::error::{Result, SgclError};
use crate::graph::{degree_bound, sym_norm_coeffs, CsrGraph};
use crate::nd::{spmm, DenseMatrix, ParamTensor};
use crate::neuron::{
    neuron_step, NeuronConfig, NeuronKind, NeuronState, ResetMode,
};

/// L-layer GCN with relu at every layer: the reference model whose outputs
/// the constructed SNN approximates via firing rates.
#[derive(Debug, Clone)]
pub struct OracleGcn {
    /// weights[0] is d x k, the rest k x k.
    pub weights: Vec<DenseMatrix>,
}

impl OracleGcn {
    pub fn random(d: usize, k: usize, depth: usize, scale: f32, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::with_capacity(depth);
        weights.push(DenseMatrix::gaussian(d, k, scale / (d as f32).sqrt(), rng));
        for _ in 1..depth {
            weights.push(DenseMatrix::gaussian(k, k, scale / (k as f32).sqrt(), rng));
        }
        OracleGcn { weights }
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.cols)
    }

    /// nu: the largest operator norm among the layer weights.
    pub fn max_operator_norm(&self) -> f32 {
        self.weights
            .iter()
            .map(|w| operator_norm(w))
            .fold(0.0, f32::max)
    }
}

/// z* per node: relu(A_hat ... relu(A_hat X W^1) ... W^L), relu applied at
/// the final layer as well so both sides of the comparison are non-negative.
pub fn oracle_forward(g: &CsrGraph, oracle: &OracleGcn) -> Result<DenseMatrix> {
    if g.features.cols != oracle.weights[0].rows {
        return Err(SgclError::Dimension(format!(
            "oracle_forward: features width {} vs W1 rows {}",
            g.features.cols, oracle.weights[0].rows
        )));
    }
    let coeffs = sym_norm_coeffs(g);
    let mut h = g.features.clone();
    for w in &oracle.weights {
        let agg = spmm(&coeffs, g, &h)?;
        let z = agg.matmul(w)?;
        h = crate::nd::relu(&z);
    }
    Ok(h)
}

/// The constructive SNN: layer-1 weight for step t is T times the t-th row
/// block of W^1_*, deeper layers are V_th W^l_*; IF neurons with reset by
/// subtraction.
pub fn construct_snn(oracle: &OracleGcn, t_steps: usize, v_th: f32) -> Result<EncoderParams> {
    let d = oracle.weights[0].rows;
    let k = oracle.output_dim();
    let widths = group_widths(d, t_steps)?;
    let mut first_w = Vec::with_capacity(t_steps);
    let mut first_b = Vec::with_capacity(t_steps);
    let mut start = 0;
    for &w in &widths {
        let mut block = oracle.weights[0].row_slice(start, w);
        block.scale(t_steps as f32);
        first_w.push(ParamTensor::new(block));
        first_b.push(ParamTensor::zeros(1, k));
        start += w;
    }
    let shared = oracle.weights[1..]
        .iter()
        .map(|w| {
            let mut scaled = w.clone();
            scaled.scale(v_th);
            ParamTensor::new(scaled)
        })
        .collect();
    let neuron = NeuronConfig {
        kind: NeuronKind::If,
        v_threshold: v_th,
        v_reset: 0.0,
        reset_mode: ResetMode::BySubtraction,
        ..NeuronConfig::default()
    };
    neuron.validate()?;
    Ok(EncoderParams {
        first_w,
        first_b,
        shared,
        tau_raw: ParamTensor::zeros(1, 1),
        neuron,
        depth: oracle.depth(),
        hidden: k,
    })
}

/// Per-layer accumulators over a multi-layer spiking run.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// sum_t H^l(t), the total input current per unit.
    pub current_sum: DenseMatrix,
    /// N^l(T), spikes fired per unit.
    pub spike_count: DenseMatrix,
    /// V^l(T), the potential left after the final step.
    pub final_potential: DenseMatrix,
    /// Minimum post-integration potential seen at any step.
    pub min_potential: f32,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub neuron: NeuronConfig,
    pub t_steps: usize,
    pub layers: Vec<LayerTrace>,
}

impl RunTrace {
    pub fn min_potential(&self) -> f32 {
        self.layers
            .iter()
            .map(|l| l.min_potential)
            .fold(f32::INFINITY, f32::min)
    }
}

/// Runs the constructed SNN with spiking at every layer: layer l > 1
/// receives the previous layer's binary spikes as input current through the
/// shared aggregation.
pub fn run_constructed_snn(
    g: &CsrGraph,
    snn: &EncoderParams,
    t_steps: usize,
) -> Result<RunTrace> {
    let coeffs = sym_norm_coeffs(g);
    let groups = partition_features(&g.features, t_steps)?;
    let n = g.num_nodes;
    let k = snn.hidden;
    let depth = snn.depth;
    let mut states: Vec<NeuronState> =
        (0..depth).map(|_| NeuronState::new(n, k, snn.neuron)).collect();
    let mut layers: Vec<LayerTrace> = (0..depth)
        .map(|_| LayerTrace {
            current_sum: DenseMatrix::zeros(n, k),
            spike_count: DenseMatrix::zeros(n, k),
            final_potential: DenseMatrix::zeros(n, k),
            min_potential: f32::INFINITY,
        })
        .collect();
    for t in 0..t_steps {
        let u1 = groups.groups[t].matmul(&snn.first_w[t].value)?;
        let mut current = spmm(&coeffs, g, &u1)?;
        for l in 0..depth {
            layers[l].current_sum.add_assign(&current);
            let (spikes, trace) = neuron_step(&mut states[l], &current)?;
            let step_min = trace.v_pre.data.iter().copied().fold(f32::INFINITY, f32::min);
            layers[l].min_potential = layers[l].min_potential.min(step_min);
            for r in 0..n {
                for c in spikes.row_set_bits(r) {
                    layers[l].spike_count[(r, c)] += 1.0;
                }
            }
            if l + 1 < depth {
                let agg = spmm(&coeffs, g, &spikes.to_dense())?;
                current = agg.matmul(&snn.shared[l].value)?;
            }
        }
    }
    for (l, state) in states.iter().enumerate() {
        layers[l].final_potential = state.potential.clone();
    }
    Ok(RunTrace {
        neuron: snn.neuron,
        t_steps,
        layers,
    })
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    /// ||z_hat_v - z*_v||_2 per node.
    pub errors: Vec<f32>,
    pub bound: f32,
    pub kappa: f32,
    pub nu: f32,
    pub degree_bound: usize,
    pub pass: Vec<bool>,
}

impl BoundReport {
    pub fn max_error(&self) -> f32 {
        self.errors.iter().copied().fold(0.0, f32::max)
    }

    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Builds the constructive SNN, runs it for T steps, and checks the
/// approximation bound per node with the empirically measured kappa.
pub fn verify_bound(
    g: &CsrGraph,
    oracle: &OracleGcn,
    t_steps: usize,
    v_th: f32,
) -> Result<BoundReport> {
    let z_star = oracle_forward(g, oracle)?;
    let snn = construct_snn(oracle, t_steps, v_th)?;
    let trace = run_constructed_snn(g, &snn, t_steps)?;
    let last = trace.layers.last().unwrap();
    let n = g.num_nodes;
    let k = snn.hidden;
    let mut errors = Vec::with_capacity(n);
    for v in 0..n {
        let mut err = 0.0f32;
        for c in 0..k {
            let rate = last.spike_count[(v, c)] / t_steps as f32;
            let diff = rate - z_star[(v, c)];
            err += diff * diff;
        }
        errors.push(err.sqrt());
    }
    let min_v = trace.min_potential();
    let kappa = if min_v < 0.0 {
        (min_v.abs() / v_th).max(1.0)
    } else {
        1.0
    };
    let nu = oracle.max_operator_norm();
    let d_max = degree_bound(g);
    let depth = oracle.depth() as i32;
    let d_feat = g.features.cols as f32;
    let t = t_steps as f32;
    let bound =
        d_feat.sqrt() * kappa * ((1.0 + d_max as f32).sqrt() * nu).powi(depth) / (t * t.sqrt());
    let pass = errors.iter().map(|&e| e <= bound).collect();
    Ok(BoundReport {
        errors,
        bound,
        kappa,
        nu,
        degree_bound: d_max,
        pass,
    })
}

/// max over layers and units of |V(T) - (sum_t H(t) - N(T) V_th)|. Holds
/// identically only under IF dynamics with reset by subtraction.
pub fn lemma1_residual(trace: &RunTrace) -> f32 {
    let v_th = trace.neuron.v_threshold;
    let mut residual = 0.0f32;
    for layer in &trace.layers {
        for i in 0..layer.final_potential.data.len() {
            let expect = layer.current_sum.data[i] - layer.spike_count.data[i] * v_th;
            residual = residual.max((layer.final_potential.data[i] - expect).abs());
        }
    }
    residual
}

/// Checked form of the reduction identity; refuses traces whose dynamics
/// the identity does not cover.
pub fn lemma1_check(trace: &RunTrace) -> Result<f32> {
    if trace.neuron.kind != NeuronKind::If {
        return Err(SgclError::Usage(
            "lemma1_check: identity requires the IF model".into(),
        ));
    }
    if trace.neuron.reset_mode != ResetMode::BySubtraction {
        return Err(SgclError::Usage(
            "lemma1_check: identity requires reset by subtraction".into(),
        ));
    }
    Ok(lemma1_residual(trace))
}

/// Largest singular value via power iteration on W^T W; 100 iterations or
/// 1e-6 relative convergence.
pub fn operator_norm(w: &DenseMatrix) -> f32 {
    let k = w.cols;
    if k == 0 || w.rows == 0 {
        return 0.0;
    }
    let mut v = vec![1.0f32 / (k as f32).sqrt(); k];
    let mut sigma = 0.0f32;
    for _ in 0..100 {
        // u = W v, then v <- W^T u
        let mut u = vec![0.0f32; w.rows];
        for r in 0..w.rows {
            let row = &w.data[r * k..(r + 1) * k];
            u[r] = row.iter().zip(&v).map(|(&a, &b)| a * b).sum();
        }
        let mut next = vec![0.0f32; k];
        for r in 0..w.rows {
            let row = &w.data[r * k..(r + 1) * k];
            for (n, &a) in next.iter_mut().zip(row) {
                *n += a * u[r];
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_sigma = norm.sqrt();
        for x in &mut next {
            *x /= norm;
        }
        v = next;
        if (new_sigma - sigma).abs() <= 1e-6 * new_sigma.max(1e-12) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}
