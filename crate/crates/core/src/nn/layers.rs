//! Layer kernels. Convolution weights are laid out `(3, 3, c_in, c_out)`;
//! dense weights are `(out, in)` row-major.

use super::tensor::{Scalar, Tensor4};
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;

fn check_conv(x: &Tensor4<impl Scalar>, weight_len: usize, c_out: usize) -> Result<()> {
    let [_, h, w, c_in] = x.dims();
    if h < KERNEL || w < KERNEL {
        return Err(Error::Shape(format!("conv input {h}x{w} is smaller than the 3x3 kernel")));
    }
    if c_out == 0 || weight_len != KERNEL * KERNEL * c_in * c_out {
        return Err(Error::Shape(format!(
            "conv weight has {weight_len} values, expected 3*3*{c_in}*{c_out}"
        )));
    }
    Ok(())
}

/// Valid, stride-1 cross-correlation with a 3x3 kernel.
pub fn conv2d_forward<T: Scalar>(x: &Tensor4<T>, weight: &[T], bias: &[T]) -> Result<Tensor4<T>> {
    let c_out = bias.len();
    check_conv(x, weight.len(), c_out)?;
    let [n, h, w, c_in] = x.dims();
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![T::zero(); n * oh * ow * c_out];
    let xd = x.data();
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let o = ((b * oh + i) * ow + j) * c_out;
                let acc = &mut out[o..o + c_out];
                acc.copy_from_slice(bias);
                for di in 0..KERNEL {
                    for dj in 0..KERNEL {
                        let xp = ((b * h + i + di) * w + j + dj) * c_in;
                        let wp = (di * KERNEL + dj) * c_in * c_out;
                        for c in 0..c_in {
                            let xv = xd[xp + c];
                            if xv == T::zero() {
                                continue;
                            }
                            let row = &weight[wp + c * c_out..wp + (c + 1) * c_out];
                            for (a, &wv) in acc.iter_mut().zip(row) {
                                *a = *a + xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor4::new([n, oh, ow, c_out], out)
}

pub struct ConvGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Tensor4<T>>,
}

/// Gradients of a valid 3x3 convolution given the upstream gradient.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &[T],
    grad_out: &Tensor4<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    let [n, h, w, c_in] = x.dims();
    let [gn, oh, ow, c_out] = grad_out.dims();
    check_conv(x, weight.len(), c_out)?;
    if gn != n || oh != h - 2 || ow != w - 2 {
        return Err(Error::Shape(format!(
            "conv grad {:?} does not match input {:?}",
            grad_out.dims(),
            x.dims()
        )));
    }
    let mut gw = vec![T::zero(); weight.len()];
    let mut gb = vec![T::zero(); c_out];
    let mut gx = if want_input {
        vec![T::zero(); x.data().len()]
    } else {
        Vec::new()
    };
    let xd = x.data();
    let gd = grad_out.data();
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let go = ((b * oh + i) * ow + j) * c_out;
                let g = &gd[go..go + c_out];
                for (acc, &gv) in gb.iter_mut().zip(g) {
                    *acc = *acc + gv;
                }
                for di in 0..KERNEL {
                    for dj in 0..KERNEL {
                        let xp = ((b * h + i + di) * w + j + dj) * c_in;
                        let wp = (di * KERNEL + dj) * c_in * c_out;
                        for c in 0..c_in {
                            let xv = xd[xp + c];
                            let range = wp + c * c_out..wp + (c + 1) * c_out;
                            if xv != T::zero() {
                                for (acc, &gv) in gw[range.clone()].iter_mut().zip(g) {
                                    *acc = *acc + xv * gv;
                                }
                            }
                            if want_input {
                                let dot = weight[range].iter().zip(g).map(|(&a, &b)| a * b).sum::<T>();
                                gx[xp + c] = gx[xp + c] + dot;
                            }
                        }
                    }
                }
            }
        }
    }
    let input = if want_input {
        Some(Tensor4::new(x.dims(), gx)?)
    } else {
        None
    };
    Ok(ConvGrads {
        weight: gw,
        bias: gb,
        input,
    })
}

/// 2x2 max pooling, stride 2, trailing odd row/column dropped. Returns the
/// flat input index of each maximum (first occurrence wins ties).
pub fn maxpool2_forward<T: Scalar>(x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<u32>)> {
    let [n, h, w, c] = x.dims();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("max pool input {h}x{w} is smaller than 2x2")));
    }
    let (ph, pw) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * ph * pw * c);
    let mut arg = Vec::with_capacity(out.capacity());
    let xd = x.data();
    for b in 0..n {
        for i in 0..ph {
            for j in 0..pw {
                for ch in 0..c {
                    let mut best_idx = ((b * h + 2 * i) * w + 2 * j) * c + ch;
                    let mut best = xd[best_idx];
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                    out.push(best);
                    arg.push(best_idx as u32);
                }
            }
        }
    }
    Ok((Tensor4::new([n, ph, pw, c], out)?, arg))
}

/// Route pooled gradients back to the recorded argmax positions.
pub fn maxpool2_backward<T: Scalar>(
    grad_out: &Tensor4<T>,
    argmax: &[u32],
    input_dims: [usize; 4],
) -> Result<Tensor4<T>> {
    if grad_out.data().len() != argmax.len() {
        return Err(Error::Shape("pool gradient and argmax lengths differ".into()));
    }
    let mut gx = vec![T::zero(); input_dims.iter().product()];
    for (&g, &idx) in grad_out.data().iter().zip(argmax) {
        let slot = gx
            .get_mut(idx as usize)
            .ok_or_else(|| Error::Shape("pool argmax outside input".into()))?;
        *slot = *slot + g;
    }
    Tensor4::new(input_dims, gx)
}

/// `w * x + b` for `w` of shape `(out, in)`.
pub fn dense_forward<T: Scalar>(x: &[T], weight: &[T], bias: &[T]) -> Result<Vec<T>> {
    let n_in = x.len();
    let n_out = bias.len();
    if n_in == 0 || weight.len() != n_in * n_out {
        return Err(Error::Shape(format!(
            "dense weight has {} values, expected {n_out}x{n_in}",
            weight.len()
        )));
    }
    Ok(weight
        .chunks_exact(n_in)
        .zip(bias)
        .map(|(row, &b)| b + row.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>())
        .collect())
}

/// Accumulate dense-layer gradients for one sample into `acc`, returning
/// the gradient with respect to the input.
pub fn dense_backward<T: Scalar>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    acc_weight: &mut [T],
    acc_bias: &mut [T],
) -> Vec<T> {
    let n_in = x.len();
    let mut gx = vec![T::zero(); n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        acc_bias[o] = acc_bias[o] + g;
        let row = &weight[o * n_in..(o + 1) * n_in];
        let grow = &mut acc_weight[o * n_in..(o + 1) * n_in];
        for ((gw, &xv), (gi, &wv)) in grow.iter_mut().zip(x).zip(gx.iter_mut().zip(row)) {
            *gw = *gw + g * xv;
            *gi = *gi + g * wv;
        }
    }
    gx
}

pub fn relu_in_place<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

pub fn relu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Sparse categorical cross-entropy and its gradient w.r.t. the logits.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Argument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let log_sum = logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    let loss = log_sum - (logits[label] - max);
    let mut grad = softmax(logits);
    grad[label] = grad[label] - T::one();
    Ok((loss.max(T::zero()), grad))
}
