//! Efficiency and similarity metrics: the theoretical energy model (SOP vs
//! MAC accounting), output sparsity, and linear centered kernel alignment.

use crate::bits::BinaryMatrix;
use crate::encoder::{group_widths, SpikeTrain};
use crate::error::{Result, SgclError};
use crate::nd::DenseMatrix;

/// Energy per multiply-accumulate, picojoules (45nm process figure).
pub const E_MAC_PJ: f64 = 4.6;
/// Energy per spike-driven synaptic operation, picojoules.
pub const E_SOP_PJ: f64 = 3.7;
const PJ_TO_MJ: f64 = 1e-9;

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyReport {
    pub e_encoding_mj: f64,
    pub e_spiking_mj: f64,
    pub total_mj: f64,
    pub spike_count: u64,
    pub mac_count: u64,
}

/// E = E_MAC * sum_t N*d_t + E_SOP * sum_t spikes_t, where d_t is the width
/// of the t-th feature group (the per-step float encoding work).
pub fn energy_spikegcl(
    n: usize,
    d: usize,
    t_steps: usize,
    spike_counts: &[u64],
) -> Result<EnergyReport> {
    if spike_counts.len() != t_steps {
        return Err(SgclError::Dimension(format!(
            "energy_spikegcl: {} spike counts for {} steps",
            spike_counts.len(),
            t_steps
        )));
    }
    let widths = group_widths(d, t_steps)?;
    let mac_count: u64 = widths.iter().map(|&w| (n * w) as u64).sum();
    let spike_count: u64 = spike_counts.iter().sum();
    let e_encoding_mj = E_MAC_PJ * mac_count as f64 * PJ_TO_MJ;
    let e_spiking_mj = E_SOP_PJ * spike_count as f64 * PJ_TO_MJ;
    Ok(EnergyReport {
        e_encoding_mj,
        e_spiking_mj,
        total_mj: e_encoding_mj + e_spiking_mj,
        spike_count,
        mac_count,
    })
}

/// Per layer: E_MAC * (N d^2/64 + 2 N d + |E| d); a MAC cycle packs 64
/// binary operations.
pub fn energy_binary_gnn(n: usize, edges: usize, d: usize, layers: usize) -> f64 {
    let (n, e, d) = (n as f64, edges as f64, d as f64);
    layers as f64 * E_MAC_PJ * (n * d * d / 64.0 + 2.0 * n * d + e * d) * PJ_TO_MJ
}

/// Per layer: N d_in d_out MACs for the embedding plus |E| d_in and
/// |E| d_out for the aggregation.
pub fn energy_full_precision(
    n: usize,
    edges: usize,
    d_in: usize,
    d_out: usize,
    layers: usize,
) -> f64 {
    let macs = n as f64 * d_in as f64 * d_out as f64
        + edges as f64 * d_in as f64
        + edges as f64 * d_out as f64;
    layers as f64 * E_MAC_PJ * macs * PJ_TO_MJ
}

fn center_columns(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for c in 0..x.cols {
        let mean: f32 = (0..x.rows).map(|r| x[(r, c)]).sum::<f32>() / x.rows as f32;
        for r in 0..x.rows {
            out[(r, c)] -= mean;
        }
    }
    out
}

/// Linear-kernel CKA between two representations with matching rows. Uses
/// the centered-feature form, identical to the biased double-centered HSIC
/// ratio on the Gram matrices XX^T and YY^T.
pub fn cka(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.rows != y.rows {
        return Err(SgclError::Dimension(format!(
            "cka: {} vs {} rows",
            x.rows, y.rows
        )));
    }
    let xc = center_columns(x);
    let yc = center_columns(y);
    let cross = xc.t_matmul(&yc)?;
    let xx = xc.t_matmul(&xc)?;
    let yy = yc.t_matmul(&yc)?;
    let hsic_xy: f64 = cross.data.iter().map(|&v| (v as f64).powi(2)).sum();
    let hsic_xx: f64 = xx.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    let hsic_yy: f64 = yy.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if hsic_xx == 0.0 || hsic_yy == 0.0 {
        return Err(SgclError::Numeric(
            "cka undefined for zero-variance inputs".into(),
        ));
    }
    Ok(hsic_xy / (hsic_xx * hsic_yy))
}

/// Fraction of zero entries over N*T*k.
pub fn sparsity(train: &SpikeTrain) -> f64 {
    let total: u64 = train
        .steps
        .iter()
        .map(|s| (s.rows * s.cols) as u64)
        .sum();
    if total == 0 {
        return 1.0;
    }
    let ones: u64 = train.steps.iter().map(BinaryMatrix::count_ones).sum();
    1.0 - ones as f64 / total as f64
}
