//! IF / LIF / PLIF spiking neuron dynamics with both reset mechanisms,
//! Heaviside firing and the sigmoid surrogate gradient.

use crate::bits::BinaryMatrix;
use crate::error::{Result, SgclError};
use crate::nd::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NeuronKind {
    If,
    Lif,
    Plif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ResetMode {
    ToZero,
    BySubtraction,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct NeuronConfig {
    pub kind: NeuronKind,
    pub v_threshold: f32,
    pub v_reset: f32,
    pub reset_mode: ResetMode,
    /// Membrane time constant. Fixed for LIF; for PLIF this is the initial
    /// value of the learnable constant.
    pub tau_m: f32,
    pub surrogate_alpha: f32,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        NeuronConfig {
            kind: NeuronKind::Plif,
            v_threshold: 5e-3,
            v_reset: 0.0,
            reset_mode: ResetMode::BySubtraction,
            tau_m: 1.0,
            surrogate_alpha: 2.0,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_threshold <= 0.0 {
            return Err(SgclError::Config("v_threshold must be > 0".into()));
        }
        if self.v_reset >= self.v_threshold {
            return Err(SgclError::Config("v_reset must be < v_threshold".into()));
        }
        if self.tau_m <= 0.0 {
            return Err(SgclError::Config("tau_m must be > 0".into()));
        }
        Ok(())
    }
}

/// tau = softplus(raw) keeps the learnable PLIF constant strictly positive.
pub fn tau_from_raw(raw: f32) -> f32 {
    (1.0 + raw.exp()).ln()
}

/// Inverse of `tau_from_raw`; used to initialize the raw parameter.
pub fn raw_from_tau(tau: f32) -> f32 {
    (tau.exp() - 1.0).ln()
}

/// d tau / d raw = sigmoid(raw).
pub fn dtau_draw(raw: f32) -> f32 {
    1.0 / (1.0 + (-raw).exp())
}

/// Per-unit membrane potentials with their neuron configuration.
///
/// `tau` is the effective time constant used for integration; the trainer
/// refreshes it from the learnable raw parameter after each PLIF update.
#[derive(Debug, Clone)]
pub struct NeuronState {
    pub potential: DenseMatrix,
    pub config: NeuronConfig,
    pub tau: f32,
}

impl NeuronState {
    pub fn new(rows: usize, cols: usize, config: NeuronConfig) -> Self {
        let mut potential = DenseMatrix::zeros(rows, cols);
        potential.fill(config.v_reset);
        NeuronState {
            potential,
            config,
            tau: config.tau_m,
        }
    }

    pub fn reset(&mut self) {
        self.potential.fill(self.config.v_reset);
    }
}

/// Forward record of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct NeuronStepTrace {
    /// Potential after integration, before reset.
    pub v_pre: DenseMatrix,
    /// Integration drive I - (V_old - V_reset); feeds the PLIF tau gradient.
    pub leak_drive: Option<DenseMatrix>,
}

/// One integrate-fire-reset step. Returns the emitted spikes and the
/// forward trace; the state potential is updated in place.
pub fn neuron_step(
    state: &mut NeuronState,
    input_current: &DenseMatrix,
) -> Result<(BinaryMatrix, NeuronStepTrace)> {
    if input_current.shape() != state.potential.shape() {
        return Err(SgclError::Dimension(format!(
            "neuron_step: input {:?} vs state {:?}",
            input_current.shape(),
            state.potential.shape()
        )));
    }
    let cfg = state.config;
    let leaky = cfg.kind != NeuronKind::If;
    let mut leak_drive = leaky.then(|| DenseMatrix::zeros(input_current.rows, input_current.cols));
    // Integrate
    for i in 0..state.potential.data.len() {
        let v_old = state.potential.data[i];
        let current = input_current.data[i];
        state.potential.data[i] = if leaky {
            let drive = current - (v_old - cfg.v_reset);
            leak_drive.as_mut().unwrap().data[i] = drive;
            v_old + drive / state.tau
        } else {
            v_old + current
        };
    }
    let v_pre = state.potential.clone();
    // Fire (>= so the boundary case fires) and reset
    let mut spikes = BinaryMatrix::zeros(v_pre.rows, v_pre.cols);
    for r in 0..v_pre.rows {
        for c in 0..v_pre.cols {
            let i = r * v_pre.cols + c;
            if v_pre.data[i] - cfg.v_threshold >= 0.0 {
                spikes.set(r, c, true);
                state.potential.data[i] = match cfg.reset_mode {
                    ResetMode::ToZero => cfg.v_reset,
                    ResetMode::BySubtraction => v_pre.data[i] - cfg.v_threshold,
                };
            }
        }
    }
    Ok((spikes, NeuronStepTrace { v_pre, leak_drive }))
}

/// Elementwise d/dx sigmoid(alpha x) = alpha s (1 - s), the surrogate for
/// the Heaviside derivative.
pub fn surrogate_grad(v_minus_th: &DenseMatrix, alpha: f32) -> DenseMatrix {
    let mut out = v_minus_th.clone();
    for v in &mut out.data {
        let s = 1.0 / (1.0 + (-alpha * *v).exp());
        *v = alpha * s * (1.0 - s);
    }
    out
}

/// Gradients produced by one neuron step's backward pass.
#[derive(Debug)]
pub struct NeuronGrads {
    pub d_input: DenseMatrix,
    /// Gradient w.r.t. the effective tau (PLIF only, else 0).
    pub d_tau: f32,
    /// Gradient flowing into the previous step's post-reset potential.
    /// Dropped at block boundaries (stop-gradient).
    pub d_prev_potential: DenseMatrix,
}

/// Backward through one step. `upstream` is the gradient w.r.t. the emitted
/// spikes; `carry` is the gradient arriving from the next step's potential
/// (None when the state is detached, i.e. block-isolated training).
pub fn neuron_backward(
    trace: &NeuronStepTrace,
    config: &NeuronConfig,
    tau: f32,
    upstream: &DenseMatrix,
    carry: Option<&DenseMatrix>,
) -> Result<NeuronGrads> {
    if upstream.shape() != trace.v_pre.shape() {
        return Err(SgclError::Dimension("neuron_backward: shape mismatch".into()));
    }
    let leaky = config.kind != NeuronKind::If;
    if leaky && trace.leak_drive.is_none() {
        return Err(SgclError::Usage(
            "neuron_backward: trace missing the integration drive".into(),
        ));
    }
    let (rows, cols) = trace.v_pre.shape();
    let mut d_input = DenseMatrix::zeros(rows, cols);
    let mut d_prev = DenseMatrix::zeros(rows, cols);
    let mut d_tau = 0.0f64;
    let dv_di = if leaky { 1.0 / tau } else { 1.0 };
    let dv_dprev = if leaky { 1.0 - 1.0 / tau } else { 1.0 };
    for i in 0..d_input.data.len() {
        let v_pre = trace.v_pre.data[i];
        let x = v_pre - config.v_threshold;
        let s = 1.0 / (1.0 + (-config.surrogate_alpha * x).exp());
        let sg = config.surrogate_alpha * s * (1.0 - s);
        let mut g_vpre = upstream.data[i] * sg;
        if let Some(carry) = carry {
            // surrogate-smoothed derivative of the reset through v_pre
            let dpost_dpre = match config.reset_mode {
                ResetMode::BySubtraction => 1.0 - config.v_threshold * sg,
                ResetMode::ToZero => {
                    let fired = x >= 0.0;
                    let pass = if fired { 0.0 } else { 1.0 };
                    pass + (config.v_reset - v_pre) * sg
                }
            };
            g_vpre += carry.data[i] * dpost_dpre;
        }
        d_input.data[i] = g_vpre * dv_di;
        d_prev.data[i] = g_vpre * dv_dprev;
        if config.kind == NeuronKind::Plif {
            let drive = trace.leak_drive.as_ref().unwrap().data[i];
            d_tau += (g_vpre * (-drive / (tau * tau))) as f64;
        }
    }
    Ok(NeuronGrads {
        d_input,
        d_tau: d_tau as f32,
        d_prev_potential: d_prev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f32) -> DenseMatrix {
        DenseMatrix::from_vec(1, 1, vec![v]).unwrap()
    }

    fn if_config(v_th: f32, reset_mode: ResetMode) -> NeuronConfig {
        NeuronConfig {
            kind: NeuronKind::If,
            v_threshold: v_th,
            reset_mode,
            ..NeuronConfig::default()
        }
    }

    #[test]
    fn if_subtraction_hand_case() {
        let cfg = if_config(0.5, ResetMode::BySubtraction);
        let mut state = NeuronState::new(1, 1, cfg);
        state.potential.data[0] = 0.3;
        let (spikes, _) = neuron_step(&mut state, &scalar(0.4)).unwrap();
        assert!(spikes.get(0, 0));
        assert!((state.potential.data[0] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn no_stimulus_no_spike() {
        let cfg = if_config(0.5, ResetMode::BySubtraction);
        let mut state = NeuronState::new(1, 1, cfg);
        let (spikes, _) = neuron_step(&mut state, &scalar(0.0)).unwrap();
        assert!(!spikes.get(0, 0));
        assert_eq!(state.potential.data[0], 0.0);
    }

    #[test]
    fn lif_decays_toward_reset() {
        let cfg = NeuronConfig {
            kind: NeuronKind::Lif,
            v_threshold: 10.0,
            tau_m: 2.0,
            ..NeuronConfig::default()
        };
        let mut state = NeuronState::new(1, 1, cfg);
        state.potential.data[0] = 1.0;
        neuron_step(&mut state, &scalar(0.0)).unwrap();
        assert!((state.potential.data[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn threshold_boundary_fires() {
        let cfg = if_config(0.5, ResetMode::BySubtraction);
        let mut state = NeuronState::new(1, 1, cfg);
        let (spikes, _) = neuron_step(&mut state, &scalar(0.5)).unwrap();
        assert!(spikes.get(0, 0));
        assert_eq!(state.potential.data[0], 0.0);
    }

    #[test]
    fn reset_to_zero_sets_v_reset_exactly() {
        let cfg = if_config(0.5, ResetMode::ToZero);
        let mut state = NeuronState::new(2, 2, cfg);
        let input = DenseMatrix::from_vec(2, 2, vec![1.0, 0.1, 0.7, 0.0]).unwrap();
        let (spikes, _) = neuron_step(&mut state, &input).unwrap();
        assert!(spikes.get(0, 0) && spikes.get(1, 0));
        assert_eq!(state.potential.data[0], cfg.v_reset);
        assert_eq!(state.potential.data[2], cfg.v_reset);
        assert!((state.potential.data[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn subtraction_bookkeeping_identity() {
        // V(T) = sum_t I(t) - N(T) V_th for IF + reset by subtraction
        let cfg = if_config(0.35, ResetMode::BySubtraction);
        let mut state = NeuronState::new(1, 4, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t_steps = 64;
        let mut current_sum = vec![0.0f32; 4];
        let mut spike_count = vec![0u32; 4];
        for _ in 0..t_steps {
            let input =
                DenseMatrix::from_vec(1, 4, (0..4).map(|_| rng.gen_range(-0.2..0.6)).collect())
                    .unwrap();
            let (spikes, _) = neuron_step(&mut state, &input).unwrap();
            for j in 0..4 {
                current_sum[j] += input.data[j];
                if spikes.get(0, j) {
                    spike_count[j] += 1;
                }
            }
        }
        for j in 0..4 {
            let expect = current_sum[j] - spike_count[j] as f32 * cfg.v_threshold;
            assert!((state.potential.data[j] - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn if_single_step_monotone_in_input() {
        let cfg = if_config(0.5, ResetMode::BySubtraction);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let i2: f32 = rng.gen_range(-1.0..1.0);
            let i1 = i2 + rng.gen_range(0.0..1.0);
            let mut s1 = NeuronState::new(1, 1, cfg);
            let mut s2 = NeuronState::new(1, 1, cfg);
            let (sp1, _) = neuron_step(&mut s1, &scalar(i1)).unwrap();
            let (sp2, _) = neuron_step(&mut s2, &scalar(i2)).unwrap();
            assert!(sp1.get(0, 0) as u8 >= sp2.get(0, 0) as u8);
        }
    }

    #[test]
    fn surrogate_peak_value() {
        let out = surrogate_grad(&scalar(0.0), 2.0);
        assert!((out.data[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn surrogate_saturates() {
        assert!(surrogate_grad(&scalar(50.0), 2.0).data[0] < 1e-6);
        assert!(surrogate_grad(&scalar(-50.0), 2.0).data[0] < 1e-6);
    }

    #[test]
    fn surrogate_symmetric_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f32 = rng.gen_range(-5.0..5.0);
            let a = surrogate_grad(&scalar(x), 2.0).data[0];
            let b = surrogate_grad(&scalar(-x), 2.0).data[0];
            assert!(a > 0.0);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn surrogate_matches_sigmoid_finite_differences() {
        let alpha = 2.0f32;
        let sigmoid = |x: f32| 1.0 / (1.0 + (-alpha * x).exp());
        let h = 1e-3f32;
        for &x in &[-2.0f32, -0.5, 0.0, 0.3, 1.7] {
            let fd = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
            let got = surrogate_grad(&scalar(x), alpha).data[0];
            assert!((fd - got).abs() < 1e-4, "x={x}: {fd} vs {got}");
        }
    }

    #[test]
    fn backward_if_at_peak() {
        // v_pre == v_th, alpha 2 -> dI = upstream * 0.5
        let cfg = if_config(0.5, ResetMode::BySubtraction);
        let trace = NeuronStepTrace {
            v_pre: scalar(0.5),
            leak_drive: None,
        };
        let g = neuron_backward(&trace, &cfg, 1.0, &scalar(1.0), None).unwrap();
        assert!((g.d_input.data[0] - 0.5).abs() < 1e-6);
        let g0 = neuron_backward(&trace, &cfg, 1.0, &scalar(0.0), None).unwrap();
        assert_eq!(g0.d_input.data[0], 0.0);
    }

    #[test]
    fn backward_lif_scales_by_inv_tau() {
        let cfg = NeuronConfig {
            kind: NeuronKind::Lif,
            v_threshold: 0.5,
            tau_m: 4.0,
            ..NeuronConfig::default()
        };
        let trace = NeuronStepTrace {
            v_pre: scalar(0.5),
            leak_drive: Some(scalar(0.3)),
        };
        let g = neuron_backward(&trace, &cfg, 4.0, &scalar(1.0), None).unwrap();
        assert!((g.d_input.data[0] - 0.5 * 0.25).abs() < 1e-6);
    }

    #[test]
    fn backward_requires_trace_drive_for_leaky() {
        let cfg = NeuronConfig {
            kind: NeuronKind::Lif,
            ..NeuronConfig::default()
        };
        let trace = NeuronStepTrace {
            v_pre: scalar(0.0),
            leak_drive: None,
        };
        assert!(neuron_backward(&trace, &cfg, 2.0, &scalar(1.0), None).is_err());
    }

    #[test]
    fn plif_tau_reparameterization() {
        let raw = raw_from_tau(1.0);
        assert!((tau_from_raw(raw) - 1.0).abs() < 1e-6);
        // finite difference of softplus
        let h = 1e-3;
        let fd = (tau_from_raw(raw + h) - tau_from_raw(raw - h)) / (2.0 * h);
        assert!((fd - dtau_draw(raw)).abs() < 1e-4);
    }

    #[test]
    fn plif_tau_gradient_matches_finite_differences() {
        let cfg = NeuronConfig {
            kind: NeuronKind::Plif,
            v_threshold: 0.5,
            ..NeuronConfig::default()
        };
        let v_old = 0.2f32;
        let input = 0.45f32;
        let tau = 1.3f32;
        let run = |tau: f32| -> f32 {
            // differentiable proxy: sigmoid(alpha (v_pre - th))
            let v_pre = v_old + (input - (v_old - cfg.v_reset)) / tau;
            1.0 / (1.0 + (-cfg.surrogate_alpha * (v_pre - cfg.v_threshold)).exp())
        };
        let h = 1e-3;
        let fd = (run(tau + h) - run(tau - h)) / (2.0 * h);
        let mut state = NeuronState::new(1, 1, cfg);
        state.tau = tau;
        state.potential.data[0] = v_old;
        let (_, trace) = neuron_step(&mut state, &scalar(input)).unwrap();
        let g = neuron_backward(&trace, &cfg, tau, &scalar(1.0), None).unwrap();
        assert!((g.d_tau - fd).abs() < 1e-3, "{} vs {fd}", g.d_tau);
    }
}
