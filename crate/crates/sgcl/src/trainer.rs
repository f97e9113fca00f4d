//! Blockwise surrogate-gradient training: per-block margin ranking losses
//! with stop-gradient at block boundaries, plus the gradient-norm probe
//! that contrasts blockwise and full-recurrence backpropagation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BinaryMatrix;
use crate::contrastive::{
    mrl_loss, predictor_backward, predictor_score, shuffle_features, ContrastConfig,
    PredictorParams,
};
use crate::encoder::{
    encode_backward, encode_step, partition_features, EncoderParams, EncoderStepTrace,
    FeatureGroups,
};
use crate::error::{Result, SgclError};
use crate::graph::{drop_edges, sym_norm_coeffs, CsrGraph, NormCoeffs};
use crate::nd::{adamw_step, DenseMatrix, OptimConfig};
use crate::neuron::{dtau_draw, neuron_backward, NeuronConfig, NeuronKind, NeuronState};

/// Where the stop-gradient is placed. `State` detaches the membrane
/// potential carried across block boundaries; `EncoderOutput` detaches the
/// encoder output before the neuron, leaving only the predictor trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DetachMode {
    State,
    EncoderOutput,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub t_steps: usize,
    /// Time steps per block; gradients never cross block boundaries.
    pub block_size: usize,
    pub epochs: usize,
    pub optim: OptimConfig,
    pub contrast: ContrastConfig,
    pub neuron: NeuronConfig,
    pub depth: usize,
    pub hidden: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub detach_mode: DetachMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_steps: 8,
            block_size: 1,
            epochs: 100,
            optim: OptimConfig::default(),
            contrast: ContrastConfig::default(),
            neuron: NeuronConfig::default(),
            depth: 2,
            hidden: 8,
            early_stop_patience: 20,
            seed: 0,
            detach_mode: DetachMode::State,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps == 0 {
            return Err(SgclError::Config("t_steps must be >= 1".into()));
        }
        if self.block_size == 0 || self.block_size > self.t_steps {
            return Err(SgclError::Config(format!(
                "block_size must be in 1..={}, got {}",
                self.t_steps, self.block_size
            )));
        }
        if self.epochs == 0 {
            return Err(SgclError::Config("epochs must be >= 1".into()));
        }
        self.optim.validate()?;
        self.contrast.validate()?;
        self.neuron.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BlockRecord {
    pub epoch: usize,
    pub block: usize,
    pub loss: f32,
    pub grad_norm: f32,
    pub spikes: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<BlockRecord>,
    pub epochs_run: usize,
}

impl TrainHistory {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,block,loss,grad_norm,spikes,seconds")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.epoch, r.block, r.loss, r.grad_norm, r.spikes, r.seconds
            )?;
        }
        Ok(())
    }
}

/// Clean and corrupted graph views for one epoch.
pub struct EpochViews {
    pub g_corrupt: CsrGraph,
    pub coeffs_corrupt: NormCoeffs,
    pub groups_clean: FeatureGroups,
    pub groups_corrupt: FeatureGroups,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix-style stream separation per epoch
    (seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x1234_5678)
}

/// Corruption is resampled every epoch: shuffled feature columns plus
/// dropped edges, both deterministic in (seed, epoch).
pub fn build_views(g: &CsrGraph, cfg: &TrainConfig, epoch: usize) -> Result<EpochViews> {
    let es = epoch_seed(cfg.contrast.seed ^ cfg.seed, epoch);
    let (x_shuffled, _) = shuffle_features(&g.features, es);
    let g_corrupt = drop_edges(g, cfg.contrast.edge_drop_p, es.wrapping_add(1))?;
    let coeffs_corrupt = sym_norm_coeffs(&g_corrupt);
    Ok(EpochViews {
        g_corrupt,
        coeffs_corrupt,
        groups_clean: partition_features(&g.features, cfg.t_steps)?,
        groups_corrupt: partition_features(&x_shuffled, cfg.t_steps)?,
    })
}

/// Everything the backward pass needs about one forward step.
pub struct StepData {
    pub spikes_clean: BinaryMatrix,
    pub spikes_corrupt: BinaryMatrix,
    pub trace_clean: EncoderStepTrace,
    pub trace_corrupt: EncoderStepTrace,
    pub loss: f32,
    pub d_pos: Vec<f32>,
    pub d_neg: Vec<f32>,
}

#[allow(clippy::too_many_arguments)]
pub fn forward_step(
    g: &CsrGraph,
    coeffs: &NormCoeffs,
    views: &EpochViews,
    encoder: &EncoderParams,
    predictor: &PredictorParams,
    margin: f32,
    t: usize,
    state_clean: &mut NeuronState,
    state_corrupt: &mut NeuronState,
) -> Result<StepData> {
    let (s1, _, tr1) = encode_step(g, coeffs, &views.groups_clean.groups[t], encoder, t, state_clean)?;
    let (s2, _, tr2) = encode_step(
        &views.g_corrupt,
        &views.coeffs_corrupt,
        &views.groups_corrupt.groups[t],
        encoder,
        t,
        state_corrupt,
    )?;
    let pos = predictor_score(&s1, predictor)?;
    let neg = predictor_score(&s2, predictor)?;
    let (loss, d_pos, d_neg) = mrl_loss(&pos, &neg, margin);
    Ok(StepData {
        spikes_clean: s1,
        spikes_corrupt: s2,
        trace_clean: tr1,
        trace_corrupt: tr2,
        loss,
        d_pos,
        d_neg,
    })
}

/// Backward through one block of consecutive steps. Gradient flows through
/// the membrane recurrence inside the block and is dropped at the block
/// boundary (stop-gradient).
pub fn backward_block(
    g: &CsrGraph,
    coeffs: &NormCoeffs,
    views: &EpochViews,
    encoder: &mut EncoderParams,
    predictor: &mut PredictorParams,
    steps: &[StepData],
    detach_mode: DetachMode,
) -> Result<()> {
    let neuron = encoder.neuron;
    let tau = encoder.effective_tau();
    let mut carry_clean: Option<DenseMatrix> = None;
    let mut carry_corrupt: Option<DenseMatrix> = None;
    let mut d_tau_total = 0.0f32;
    for step in steps.iter().rev() {
        let d_spikes_clean = predictor_backward(&step.spikes_clean, predictor, &step.d_pos)?;
        let d_spikes_corrupt = predictor_backward(&step.spikes_corrupt, predictor, &step.d_neg)?;
        let grads_clean = neuron_backward(
            &step.trace_clean.neuron,
            &neuron,
            tau,
            &d_spikes_clean,
            carry_clean.as_ref(),
        )?;
        let grads_corrupt = neuron_backward(
            &step.trace_corrupt.neuron,
            &neuron,
            tau,
            &d_spikes_corrupt,
            carry_corrupt.as_ref(),
        )?;
        d_tau_total += grads_clean.d_tau + grads_corrupt.d_tau;
        if detach_mode == DetachMode::State {
            encode_backward(g, coeffs, encoder, &step.trace_clean, &grads_clean.d_input)?;
            encode_backward(
                &views.g_corrupt,
                &views.coeffs_corrupt,
                encoder,
                &step.trace_corrupt,
                &grads_corrupt.d_input,
            )?;
        }
        carry_clean = Some(grads_clean.d_prev_potential);
        carry_corrupt = Some(grads_corrupt.d_prev_potential);
    }
    if neuron.kind == NeuronKind::Plif {
        let raw = encoder.tau_raw.value.data[0];
        encoder.tau_raw.grad.data[0] += d_tau_total * dtau_draw(raw);
    }
    Ok(())
}

fn block_param_indices(block: usize, block_size: usize, t_steps: usize) -> std::ops::Range<usize> {
    let start = block * block_size;
    start..(start + block_size).min(t_steps)
}

fn apply_block_update(
    encoder: &mut EncoderParams,
    predictor: &mut PredictorParams,
    steps: std::ops::Range<usize>,
    optim: &OptimConfig,
) -> Result<()> {
    for t in steps {
        adamw_step(&mut encoder.first_w[t], optim)?;
        adamw_step(&mut encoder.first_b[t], optim)?;
    }
    for w in &mut encoder.shared {
        adamw_step(w, optim)?;
    }
    adamw_step(&mut predictor.w, optim)?;
    adamw_step(&mut predictor.b, optim)?;
    if encoder.neuron.kind == NeuronKind::Plif {
        adamw_step(&mut encoder.tau_raw, optim)?;
    }
    Ok(())
}

fn first_layer_grad_norm(encoder: &EncoderParams, steps: std::ops::Range<usize>) -> f32 {
    let mut sum = 0.0f32;
    let mut count = 0usize;
    for t in steps {
        sum += encoder.first_w[t]
            .grad
            .data
            .iter()
            .map(|v| v * v)
            .sum::<f32>();
        count += encoder.first_w[t].grad.data.len();
    }
    if count == 0 {
        0.0
    } else {
        (sum / count as f32).sqrt()
    }
}

/// Runs the blockwise training loop (per-epoch corruption, per-block MRL
/// loss, local AdamW updates) and returns the trained parameters.
pub fn train(
    g: &CsrGraph,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, PredictorParams, TrainHistory)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut encoder = EncoderParams::init(
        g.features.cols,
        cfg.t_steps,
        cfg.hidden,
        cfg.depth,
        cfg.neuron,
        &mut rng,
    )?;
    let mut predictor = PredictorParams::init(cfg.hidden, &mut rng);
    let coeffs = sym_norm_coeffs(g);
    let mut history = TrainHistory::default();
    let num_blocks = cfg.t_steps.div_ceil(cfg.block_size);
    let mut best_loss = f32::INFINITY;
    let mut stale_epochs = 0usize;
    for epoch in 0..cfg.epochs {
        let epoch_start = Instant::now();
        let views = build_views(g, cfg, epoch)?;
        let mut state_clean = encoder.new_state(g.num_nodes);
        let mut state_corrupt = encoder.new_state(g.num_nodes);
        let mut epoch_loss = 0.0f32;
        for block in 0..num_blocks {
            let block_start = Instant::now();
            let range = block_param_indices(block, cfg.block_size, cfg.t_steps);
            let mut steps = Vec::with_capacity(range.len());
            let mut spikes = 0u64;
            for t in range.clone() {
                let step = forward_step(
                    g,
                    &coeffs,
                    &views,
                    &encoder,
                    &predictor,
                    cfg.contrast.margin,
                    t,
                    &mut state_clean,
                    &mut state_corrupt,
                )?;
                spikes += step.spikes_clean.count_ones();
                steps.push(step);
            }
            let block_loss =
                steps.iter().map(|s| s.loss).sum::<f32>() / steps.len() as f32;
            if !block_loss.is_finite() {
                return Err(SgclError::Numeric(format!(
                    "non-finite loss at epoch {epoch} block {block}"
                )));
            }
            backward_block(
                g,
                &coeffs,
                &views,
                &mut encoder,
                &mut predictor,
                &steps,
                cfg.detach_mode,
            )?;
            let grad_norm = first_layer_grad_norm(&encoder, range.clone());
            apply_block_update(&mut encoder, &mut predictor, range, &cfg.optim)?;
            let tau = encoder.effective_tau();
            state_clean.tau = tau;
            state_corrupt.tau = tau;
            epoch_loss += block_loss;
            history.records.push(BlockRecord {
                epoch,
                block,
                loss: block_loss,
                grad_norm,
                spikes,
                seconds: block_start.elapsed().as_secs_f64(),
            });
        }
        history.epochs_run = epoch + 1;
        let _ = epoch_start;
        epoch_loss /= num_blocks as f32;
        if epoch_loss < best_loss - 1e-6 {
            best_loss = epoch_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok((encoder, predictor, history))
}

/// Per-step first-layer gradient norms, with or without block isolation.
///
/// With isolation each step is its own block (local loss, detached state).
/// Without isolation a single loss at the final step is backpropagated
/// through the full temporal recurrence via the surrogate at every step.
pub fn grad_norm_probe(g: &CsrGraph, cfg: &TrainConfig, isolate: bool) -> Result<Vec<f32>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut encoder = EncoderParams::init(
        g.features.cols,
        cfg.t_steps,
        cfg.hidden,
        cfg.depth,
        cfg.neuron,
        &mut rng,
    )?;
    let mut predictor = PredictorParams::init(cfg.hidden, &mut rng);
    let coeffs = sym_norm_coeffs(g);
    let views = build_views(g, cfg, 0)?;
    let mut state_clean = encoder.new_state(g.num_nodes);
    let mut state_corrupt = encoder.new_state(g.num_nodes);
    let mut steps = Vec::with_capacity(cfg.t_steps);
    for t in 0..cfg.t_steps {
        steps.push(forward_step(
            g,
            &coeffs,
            &views,
            &encoder,
            &predictor,
            cfg.contrast.margin,
            t,
            &mut state_clean,
            &mut state_corrupt,
        )?);
    }
    let mut norms = vec![0.0f32; cfg.t_steps];
    if isolate {
        for (t, step) in steps.iter().enumerate() {
            backward_block(
                g,
                &coeffs,
                &views,
                &mut encoder,
                &mut predictor,
                std::slice::from_ref(step),
                DetachMode::State,
            )?;
            norms[t] = first_layer_grad_norm(&encoder, t..t + 1);
            encoder.first_w[t].zero_grad();
            encoder.first_b[t].zero_grad();
            predictor.w.zero_grad();
            predictor.b.zero_grad();
        }
    } else {
        // only the final step's loss contributes; earlier steps receive
        // gradient solely through the membrane recurrence
        for step in steps.iter_mut().take(cfg.t_steps - 1) {
            step.d_pos.iter_mut().for_each(|v| *v = 0.0);
            step.d_neg.iter_mut().for_each(|v| *v = 0.0);
        }
        backward_block(
            g,
            &coeffs,
            &views,
            &mut encoder,
            &mut predictor,
            &steps,
            DetachMode::State,
        )?;
        for t in 0..cfg.t_steps {
            norms[t] = first_layer_grad_norm(&encoder, t..t + 1);
        }
    }
    Ok(norms)
}
