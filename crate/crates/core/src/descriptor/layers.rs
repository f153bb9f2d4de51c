//! Layer kernels with hand-written backward passes.
//!
//! Volumetric activations are stored channel-major, `[c][z][y][x]` with x
//! fastest, for cubic volumes of side `d`.

use serde::{Deserialize, Serialize};

use super::real::{gemm, Layout, Real};
use crate::error::{invalid, Result};

/// One entry of a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3×3×3 valid (unpadded) convolution.
    Conv3 { out: usize },
    Relu,
    /// 2×2×2 max pooling with stride 2.
    MaxPool2,
    /// Fully connected; flattens volumetric input.
    Linear { out: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Volume { channels: usize, side: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Volume { channels, side } => channels * side.pow(3),
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LayerSpec {
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match (*self, input) {
            (LayerSpec::Conv3 { out }, Shape::Volume { side, .. }) => {
                if side < 3 {
                    return invalid(format!("conv3 needs side ≥ 3, got {side}"));
                }
                Ok(Shape::Volume { channels: out, side: side - 2 })
            }
            (LayerSpec::Conv3 { .. }, Shape::Flat(_)) => invalid("conv3 after a flat layer"),
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::MaxPool2, Shape::Volume { channels, side }) => {
                if side % 2 != 0 || side == 0 {
                    return invalid(format!("max-pool needs an even side, got {side}"));
                }
                Ok(Shape::Volume { channels, side: side / 2 })
            }
            (LayerSpec::MaxPool2, Shape::Flat(_)) => invalid("max-pool after a flat layer"),
            (LayerSpec::Linear { out }, _) => Ok(Shape::Flat(out)),
        }
    }

    /// `(weight count, bias count)`.
    pub fn parameter_counts(&self, input: Shape) -> (usize, usize) {
        match (*self, input) {
            (LayerSpec::Conv3 { out }, Shape::Volume { channels, .. }) => (out * channels * 27, out),
            (LayerSpec::Linear { out }, s) => (out * s.len(), out),
            _ => (0, 0),
        }
    }

    /// Fan-in used for He initialization.
    pub fn fan_in(&self, input: Shape) -> usize {
        match (*self, input) {
            (LayerSpec::Conv3 { .. }, Shape::Volume { channels, .. }) => channels * 27,
            (LayerSpec::Linear { .. }, s) => s.len(),
            _ => 0,
        }
    }
}

/// Unfolds 3×3×3 neighborhoods into a `[cin·27][o³]` matrix, `o = d − 2`.
pub(crate) fn im2col<T: Real>(input: &[T], cin: usize, d: usize, cols: &mut Vec<T>) {
    let o = d - 2;
    let n = o * o * o;
    cols.clear();
    cols.resize(cin * 27 * n, T::zero());
    for ci in 0..cin {
        let src = &input[ci * d * d * d..(ci + 1) * d * d * d];
        for kz in 0..3 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = ci * 27 + kz * 9 + ky * 3 + kx;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for oz in 0..o {
                        for oy in 0..o {
                            let s = (oz + kz) * d * d + (oy + ky) * d + kx;
                            let t = oz * o * o + oy * o;
                            dst[t..t + o].copy_from_slice(&src[s..s + o]);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into a `[cin][d³]` gradient.
pub(crate) fn col2im<T: Real>(cols: &[T], cin: usize, d: usize, out: &mut [T]) {
    let o = d - 2;
    let n = o * o * o;
    for ci in 0..cin {
        let dst = &mut out[ci * d * d * d..(ci + 1) * d * d * d];
        for kz in 0..3 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = ci * 27 + kz * 9 + ky * 3 + kx;
                    let src = &cols[row * n..(row + 1) * n];
                    for oz in 0..o {
                        for oy in 0..o {
                            let s = (oz + kz) * d * d + (oy + ky) * d + kx;
                            let t = oz * o * o + oy * o;
                            for (a, b) in dst[s..s + o].iter_mut().zip(&src[t..t + o]) {
                                *a += *b;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out[co] = W[co] · cols + b[co]`, output `[cout][o³]`.
pub(crate) fn conv3_forward<T: Real>(
    input: &[T],
    cin: usize,
    d: usize,
    weights: &[T],
    bias: &[T],
    cout: usize,
    scratch: &mut Vec<T>,
) -> Vec<T> {
    let o = d - 2;
    let n = o * o * o;
    let k = cin * 27;
    im2col(input, cin, d, scratch);
    let mut out = vec![T::zero(); cout * n];
    for (co, chunk) in out.chunks_exact_mut(n).enumerate() {
        chunk.fill(bias[co]);
    }
    // outᵀ (n × cout) = colsᵀ (n × k) · Wᵀ (k × cout); keeps the long axis in M
    gemm(
        scratch,
        Layout::row_major(k, n).transposed(),
        weights,
        Layout::row_major(cout, k).transposed(),
        T::one(),
        &mut out,
        Layout::row_major(cout, n).transposed(),
    );
    out
}

/// Accumulates weight/bias gradients and optionally returns the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3_backward<T: Real>(
    input: &[T],
    cin: usize,
    d: usize,
    weights: &[T],
    cout: usize,
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    need_input_grad: bool,
    scratch: &mut Vec<T>,
) -> Option<Vec<T>> {
    let o = d - 2;
    let n = o * o * o;
    let k = cin * 27;
    for (co, chunk) in grad_out.chunks_exact(n).enumerate() {
        grad_b[co] += chunk.iter().copied().sum::<T>();
    }
    im2col(input, cin, d, scratch);
    // dW (cout × k) += dOut (cout × n) · colsᵀ (n × k)
    gemm(
        grad_out,
        Layout::row_major(cout, n),
        scratch,
        Layout::row_major(k, n).transposed(),
        T::one(),
        grad_w,
        Layout::row_major(cout, k),
    );
    if !need_input_grad {
        return None;
    }
    // dCols (k × n) = Wᵀ (k × cout) · dOut (cout × n)
    let mut dcols = std::mem::take(scratch);
    gemm(
        weights,
        Layout::row_major(cout, k).transposed(),
        grad_out,
        Layout::row_major(cout, n),
        T::zero(),
        &mut dcols,
        Layout::row_major(k, n),
    );
    let mut grad_in = vec![T::zero(); cin * d * d * d];
    col2im(&dcols, cin, d, &mut grad_in);
    *scratch = dcols;
    Some(grad_in)
}

/// Returns the pooled output and, per output, the argmax input index.
pub(crate) fn maxpool2_forward<T: Real>(input: &[T], channels: usize, d: usize) -> (Vec<T>, Vec<u32>) {
    let h = d / 2;
    let mut out = Vec::with_capacity(channels * h * h * h);
    let mut arg = Vec::with_capacity(channels * h * h * h);
    for c in 0..channels {
        let base = c * d * d * d;
        for z in 0..h {
            for y in 0..h {
                for x in 0..h {
                    let mut best_i = base + (2 * z) * d * d + (2 * y) * d + 2 * x;
                    let mut best = input[best_i];
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = base + (2 * z + dz) * d * d + (2 * y + dy) * d + 2 * x + dx;
                                if input[i] > best {
                                    best = input[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_i as u32);
                }
            }
        }
    }
    (out, arg)
}

pub(crate) fn maxpool2_backward<T: Real>(grad_out: &[T], argmax: &[u32], input_len: usize) -> Vec<T> {
    let mut g = vec![T::zero(); input_len];
    for (go, &i) in grad_out.iter().zip(argmax) {
        g[i as usize] += *go;
    }
    g
}

pub(crate) fn relu_forward<T: Real>(input: &[T]) -> Vec<T> {
    input.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

pub(crate) fn relu_backward<T: Real>(input: &[T], grad_out: &[T]) -> Vec<T> {
    input.iter().zip(grad_out).map(|(&x, &g)| if x > T::zero() { g } else { T::zero() }).collect()
}

pub(crate) fn linear_forward<T: Real>(input: &[T], weights: &[T], bias: &[T], out_dim: usize) -> Vec<T> {
    let n_in = input.len();
    let mut out = bias.to_vec();
    gemm(weights, Layout::row_major(out_dim, n_in), input, Layout::row_major(n_in, 1), T::one(), &mut out, Layout::row_major(out_dim, 1));
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<T: Real>(
    input: &[T],
    weights: &[T],
    out_dim: usize,
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let n_in = input.len();
    for (gb, g) in grad_b.iter_mut().zip(grad_out) {
        *gb += *g;
    }
    // dW += dy · xᵀ
    gemm(grad_out, Layout::row_major(out_dim, 1), input, Layout::row_major(1, n_in), T::one(), grad_w, Layout::row_major(out_dim, n_in));
    if !need_input_grad {
        return None;
    }
    let mut gi = vec![T::zero(); n_in];
    gemm(weights, Layout::row_major(out_dim, n_in).transposed(), grad_out, Layout::row_major(out_dim, 1), T::zero(), &mut gi, Layout::row_major(n_in, 1));
    Some(gi)
}
