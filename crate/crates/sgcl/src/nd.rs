//! Dense/sparse numeric kernels (32-bit) with explicit forward/backward
//! contracts, parameter storage, and the AdamW optimizer.

use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgclError};
use crate::graph::{CsrGraph, NormCoeffs};

/// Row-major dense f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SgclError::Dimension(format!(
                "data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Zero-mean Gaussian init with std 1/sqrt(fan_in).
    pub fn gaussian_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = 1.0 / (rows as f32).sqrt();
        Self::gaussian(rows, cols, std, rng)
    }

    pub fn gaussian(rows: usize, cols: usize, std: f32, rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::zeros(rows, cols);
        for v in &mut m.data {
            // Box-Muller keeps the dependency surface small and seeds stable.
            let u1: f32 = rng.gen_range(f32::EPSILON..1.0);
            let u2: f32 = rng.gen::<f32>();
            *v = std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f32::consts::PI * u2).cos();
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }

    /// out = self . other
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(SgclError::Dimension(format!(
                "matmul {}x{} . {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        Ok(out)
    }

    /// out = self^T . other
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(SgclError::Dimension(format!(
                "t_matmul {}x{} , {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            for i in 0..self.cols {
                let a = self.data[r * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[r * other.cols..(r + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        Ok(out)
    }

    /// out = self . other^T
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(SgclError::Dimension(format!(
                "matmul_t {}x{} , {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let brow = &other.data[j * other.cols..(j + 1) * other.cols];
                out.data[i * other.rows + j] =
                    arow.iter().zip(brow).map(|(&a, &b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f32) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn column_slice(&self, start: usize, width: usize) -> DenseMatrix {
        debug_assert!(start + width <= self.cols);
        let mut out = DenseMatrix::zeros(self.rows, width);
        for r in 0..self.rows {
            out.data[r * width..(r + 1) * width]
                .copy_from_slice(&self.data[r * self.cols + start..r * self.cols + start + width]);
        }
        out
    }

    pub fn row_slice(&self, start: usize, count: usize) -> DenseMatrix {
        debug_assert!(start + count <= self.rows);
        DenseMatrix {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    pub fn frobenius_norm(&self) -> f32 {
        self.data.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f32;
    fn index(&self, (r, c): (usize, usize)) -> &f32 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f32 {
        &mut self.data[r * self.cols + c]
    }
}

/// Trainable tensor with gradient buffer and AdamW moments.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub adamw_m: DenseMatrix,
    pub adamw_v: DenseMatrix,
    pub step_count: u64,
}

impl ParamTensor {
    pub fn new(value: DenseMatrix) -> Self {
        let (r, c) = value.shape();
        ParamTensor {
            value,
            grad: DenseMatrix::zeros(r, c),
            adamw_m: DenseMatrix::zeros(r, c),
            adamw_v: DenseMatrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(DenseMatrix::zeros(rows, cols))
    }

    pub fn gaussian_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::new(DenseMatrix::gaussian_init(rows, cols, rng))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub weight_decay: f32,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(SgclError::Config("learning_rate must be > 0".into()));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(SgclError::Config("betas must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// One AdamW step: decoupled weight decay, then bias-corrected Adam update.
/// Zeroes the gradient afterwards.
pub fn adamw_step(p: &mut ParamTensor, cfg: &OptimConfig) -> Result<()> {
    if !p.grad.all_finite() {
        return Err(SgclError::Numeric("non-finite gradient entries".into()));
    }
    p.step_count += 1;
    let t = p.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..p.value.data.len() {
        let g = p.grad.data[i];
        p.value.data[i] -= cfg.learning_rate * cfg.weight_decay * p.value.data[i];
        p.adamw_m.data[i] = cfg.beta1 * p.adamw_m.data[i] + (1.0 - cfg.beta1) * g;
        p.adamw_v.data[i] = cfg.beta2 * p.adamw_v.data[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = p.adamw_m.data[i] / bc1;
        let v_hat = p.adamw_v.data[i] / bc2;
        p.value.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    p.zero_grad();
    Ok(())
}

/// Normalized sparse aggregation: out[u] = self_term(u) x[u] + sum a_uv x[v].
///
/// The operator is symmetric, so the gradient w.r.t. x is the same spmm
/// applied to the upstream gradient.
pub fn spmm(coeffs: &NormCoeffs, g: &CsrGraph, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows != g.num_nodes {
        return Err(SgclError::Dimension(format!(
            "spmm: x has {} rows, graph has {} nodes",
            x.rows, g.num_nodes
        )));
    }
    let k = x.cols;
    let mut out = DenseMatrix::zeros(x.rows, k);
    for u in 0..g.num_nodes {
        let s = coeffs.self_term[u];
        let dst_range = u * k..(u + 1) * k;
        {
            let src = &x.data[dst_range.clone()];
            let dst = &mut out.data[dst_range.clone()];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d = s * v;
            }
        }
        for e in g.row_ptr[u]..g.row_ptr[u + 1] {
            let v = g.col_idx[e];
            let a = coeffs.neighbor[e];
            let src = &x.data[v * k..(v + 1) * k];
            let dst = &mut out.data[u * k..(u + 1) * k];
            for (d, &sv) in dst.iter_mut().zip(src) {
                *d += a * sv;
            }
        }
    }
    Ok(out)
}

/// out = x . w + b (bias broadcast over rows).
pub fn linear(x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows != 1 || b.cols != w.cols {
        return Err(SgclError::Dimension(format!(
            "linear: bias {}x{} does not match weight cols {}",
            b.rows, b.cols, w.cols
        )));
    }
    let mut out = x.matmul(w)?;
    for r in 0..out.rows {
        for c in 0..out.cols {
            out.data[r * out.cols + c] += b.data[c];
        }
    }
    Ok(out)
}

/// Gradients of `linear`: dW = x^T dOut, db = column-sum(dOut), dX = dOut W^T.
pub fn linear_backward(
    x: &DenseMatrix,
    w: &DenseMatrix,
    d_out: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let dw = x.t_matmul(d_out)?;
    let mut db = DenseMatrix::zeros(1, d_out.cols);
    for r in 0..d_out.rows {
        for c in 0..d_out.cols {
            db.data[c] += d_out.data[r * d_out.cols + c];
        }
    }
    let dx = d_out.matmul_t(w)?;
    Ok((dw, db, dx))
}

pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for v in &mut out.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Masks the upstream gradient by (x > 0).
pub fn relu_backward(x: &DenseMatrix, d_out: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(x.shape(), d_out.shape());
    let mut dx = d_out.clone();
    for (d, &v) in dx.data.iter_mut().zip(&x.data) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}
