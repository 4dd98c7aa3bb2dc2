//! Layer forward/backward passes.
//!
//! Per-sample layers (convolution, pooling, LSTM, dense, activations) take a
//! single `T×C` sample; batch normalization is inherently batch-wide and takes
//! `B×T×C`. Backward functions return gradients for every differentiable
//! input so each layer can be finite-difference checked in isolation.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Batch-normalization epsilon.
pub const BN_EPS: f64 = 1e-3;
/// Running-statistics momentum: `running = momentum*running + (1-momentum)*batch`.
pub const BN_MOMENTUM: f64 = 0.99;

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Dot product with eight independent accumulator lanes so the reduction
/// vectorizes; a naive sequential sum is latency-bound scalar code.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        let pb = &b[i * LANES..(i + 1) * LANES];
        for j in 0..LANES {
            acc[j] += pa[j] * pb[j];
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    acc.iter().sum::<f64>() + tail
}

// ---------------------------------------------------------------------------
// 1-D convolution with "same" zero padding
// ---------------------------------------------------------------------------

/// Cross-correlation of `x` (`T×Cin`) with `w` (`K×Cin×Cout`) plus `bias`,
/// zero-padded so the output is `T×Cout`.
///
/// Left pad is `floor((K-1)/2)`; an even kernel puts the extra zero on the
/// right (K=4 pads 1 left, 2 right).
pub fn conv1d_same(x: &Tensor, w: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (t_len, cin) = (x.shape()[0], x.shape()[1]);
    if w.shape().len() != 3 || w.shape()[1] != cin {
        return Err(Error::ShapeMismatch(format!(
            "conv weights {:?} incompatible with input {:?}",
            w.shape(),
            x.shape()
        )));
    }
    let (k, cout) = (w.shape()[0], w.shape()[2]);
    bias.expect_shape(&[cout], "conv bias")?;
    let left = (k - 1) / 2;

    let mut y = Tensor::zeros(&[t_len, cout]);
    for t in 0..t_len {
        y.row_mut(t).copy_from_slice(bias.data());
    }
    let wd = w.data();
    let xd = x.data();
    let yd = y.data_mut();
    // (k, c)-outer order keeps each 2-KB weight row hot across all frames
    for kk in 0..k {
        for c in 0..cin {
            let wrow = &wd[(kk * cin + c) * cout..(kk * cin + c + 1) * cout];
            // y[t] += x[t + kk - left][c] * wrow
            let (t_first, s_first) = if kk >= left { (0, kk - left) } else { (left - kk, 0) };
            let span = t_len.saturating_sub(t_first).min(t_len.saturating_sub(s_first));
            for offset in 0..span {
                let xv = xd[(s_first + offset) * cin + c];
                if xv != 0.0 {
                    let t = t_first + offset;
                    axpy(xv, wrow, &mut yd[t * cout..(t + 1) * cout]);
                }
            }
        }
    }
    Ok(y)
}

/// Gradients of `conv1d_same` w.r.t. input, weights and bias.
pub fn conv1d_same_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (t_len, cin) = (x.shape()[0], x.shape()[1]);
    let (k, cout) = (w.shape()[0], w.shape()[2]);
    let left = (k - 1) / 2;
    debug_assert_eq!(dy.shape(), &[t_len, cout]);

    let mut dx = Tensor::zeros(&[t_len, cin]);
    let mut dw = Tensor::zeros(&[k, cin, cout]);
    let mut db = Tensor::zeros(&[cout]);
    let wd = w.data();
    let xd = x.data();
    let dyd = dy.data();

    for t in 0..t_len {
        axpy(1.0, dy.row(t), db.data_mut());
    }
    let dxd = dx.data_mut();
    let dwd = dw.data_mut();
    for kk in 0..k {
        for c in 0..cin {
            let row = (kk * cin + c) * cout;
            let wrow = &wd[row..row + cout];
            let dwrow = &mut dwd[row..row + cout];
            let (t_first, s_first) = if kk >= left { (0, kk - left) } else { (left - kk, 0) };
            let span = t_len.saturating_sub(t_first).min(t_len.saturating_sub(s_first));
            for offset in 0..span {
                let t = t_first + offset;
                let s_in = s_first + offset;
                let dyrow = &dyd[t * cout..(t + 1) * cout];
                dxd[s_in * cin + c] += dot(dyrow, wrow);
                let xv = xd[s_in * cin + c];
                if xv != 0.0 {
                    axpy(xv, dyrow, dwrow);
                }
            }
        }
    }
    (dx, dw, db)
}

// ---------------------------------------------------------------------------
// Batch normalization over the B×T axis, per channel
// ---------------------------------------------------------------------------

/// Cached values from a train-mode batchnorm forward pass.
pub struct BnCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

/// Train-mode batch normalization of `x` (`B×T×C`): normalizes per channel
/// with batch statistics and folds the batch into the running statistics.
pub fn batchnorm_forward_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
) -> Result<(Tensor, BnCache)> {
    let c = *x.shape().last().unwrap();
    gamma.expect_shape(&[c], "batchnorm gamma")?;
    beta.expect_shape(&[c], "batchnorm beta")?;
    let n = x.len() / c;

    let mut mean = vec![0.0; c];
    for row in x.data().chunks_exact(c) {
        axpy(1.0, row, &mut mean);
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; c];
    for row in x.data().chunks_exact(c) {
        for (vch, (&xv, &m)) in var.iter_mut().zip(row.iter().zip(&mean)) {
            let d = xv - m;
            *vch += d * d;
        }
    }
    for v in &mut var {
        *v /= n as f64;
    }

    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.shape());
    for (out, row) in xhat
        .data_mut()
        .chunks_exact_mut(c)
        .zip(x.data().chunks_exact(c))
    {
        for ch in 0..c {
            out[ch] = (row[ch] - mean[ch]) * inv_std[ch];
        }
    }
    let mut y = Tensor::zeros(x.shape());
    for (out, row) in y
        .data_mut()
        .chunks_exact_mut(c)
        .zip(xhat.data().chunks_exact(c))
    {
        for ch in 0..c {
            out[ch] = gamma.data()[ch] * row[ch] + beta.data()[ch];
        }
    }

    for ch in 0..c {
        let rm = &mut running_mean.data_mut()[ch];
        *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * mean[ch];
        let rv = &mut running_var.data_mut()[ch];
        *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * var[ch];
    }

    Ok((y, BnCache { xhat, inv_std }))
}

/// Inference-mode batch normalization using running statistics.
pub fn batchnorm_forward_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
) -> Result<Tensor> {
    let c = *x.shape().last().unwrap();
    gamma.expect_shape(&[c], "batchnorm gamma")?;
    let mut y = Tensor::zeros(x.shape());
    let scale: Vec<f64> = (0..c)
        .map(|ch| gamma.data()[ch] / (running_var.data()[ch] + BN_EPS).sqrt())
        .collect();
    for (out, row) in y
        .data_mut()
        .chunks_exact_mut(c)
        .zip(x.data().chunks_exact(c))
    {
        for ch in 0..c {
            out[ch] = scale[ch] * (row[ch] - running_mean.data()[ch]) + beta.data()[ch];
        }
    }
    Ok(y)
}

/// Gradients of train-mode batchnorm w.r.t. input, gamma and beta.
pub fn batchnorm_backward(cache: &BnCache, gamma: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let c = *dy.shape().last().unwrap();
    let n = dy.len() / c;

    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for (dyrow, xrow) in dy
        .data()
        .chunks_exact(c)
        .zip(cache.xhat.data().chunks_exact(c))
    {
        for ch in 0..c {
            sum_dy[ch] += dyrow[ch];
            sum_dy_xhat[ch] += dyrow[ch] * xrow[ch];
        }
    }

    let mut dx = Tensor::zeros(dy.shape());
    let nf = n as f64;
    for ((dxrow, dyrow), xrow) in dx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dy.data().chunks_exact(c))
        .zip(cache.xhat.data().chunks_exact(c))
    {
        for ch in 0..c {
            dxrow[ch] = gamma.data()[ch] * cache.inv_std[ch] / nf
                * (nf * dyrow[ch] - sum_dy[ch] - xrow[ch] * sum_dy_xhat[ch]);
        }
    }
    let dgamma = Tensor::from_vec(&[c], sum_dy_xhat).unwrap();
    let dbeta = Tensor::from_vec(&[c], sum_dy).unwrap();
    (dx, dgamma, dbeta)
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(x.shape(), data).unwrap()
}

pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &dv)| if xv > 0.0 { dv } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data).unwrap()
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| sigmoid_scalar(v)).collect();
    Tensor::from_vec(x.shape(), data).unwrap()
}

/// Backward through sigmoid given the forward *outputs* `y`.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&yv, &dv)| dv * yv * (1.0 - yv))
        .collect();
    Tensor::from_vec(y.shape(), data).unwrap()
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// Non-overlapping max pooling along time; a trailing odd frame is dropped.
/// Also returns the argmax row index per output cell for the backward pass
/// (ties resolve to the earlier frame).
pub fn maxpool1d(x: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>)> {
    let (t_len, c) = (x.shape()[0], x.shape()[1]);
    if t_len < pool {
        return Err(Error::InvalidInput(format!(
            "maxpool needs at least {pool} frames, got {t_len}"
        )));
    }
    let t_out = t_len / pool;
    let mut y = Tensor::zeros(&[t_out, c]);
    let mut argmax = vec![0usize; t_out * c];
    for t in 0..t_out {
        for ch in 0..c {
            let mut best = x.row(t * pool)[ch];
            let mut best_row = t * pool;
            for p in 1..pool {
                let v = x.row(t * pool + p)[ch];
                if v > best {
                    best = v;
                    best_row = t * pool + p;
                }
            }
            y.row_mut(t)[ch] = best;
            argmax[t * c + ch] = best_row;
        }
    }
    Ok((y, argmax))
}

pub fn maxpool1d_backward(argmax: &[usize], t_in: usize, dy: &Tensor) -> Tensor {
    let c = dy.shape()[1];
    let mut dx = Tensor::zeros(&[t_in, c]);
    for (t, dyrow) in dy.data().chunks_exact(c).enumerate() {
        for ch in 0..c {
            dx.row_mut(argmax[t * c + ch])[ch] += dyrow[ch];
        }
    }
    dx
}

/// Per-channel mean over time: `T×C -> C`.
pub fn global_avg_pool(x: &Tensor) -> Tensor {
    let (t_len, c) = (x.shape()[0], x.shape()[1]);
    let mut y = vec![0.0; c];
    for row in x.data().chunks_exact(c) {
        axpy(1.0, row, &mut y);
    }
    for v in &mut y {
        *v /= t_len as f64;
    }
    Tensor::from_vec(&[c], y).unwrap()
}

pub fn global_avg_pool_backward(t_in: usize, dy: &Tensor) -> Tensor {
    let c = dy.len();
    let mut dx = Tensor::zeros(&[t_in, c]);
    for row in dx.data_mut().chunks_exact_mut(c) {
        for ch in 0..c {
            row[ch] = dy.data()[ch] / t_in as f64;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Affine map of a single vector: `y = x·W + b`.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let cin = x.len();
    if w.shape().len() != 2 || w.shape()[0] != cin {
        return Err(Error::ShapeMismatch(format!(
            "dense weights {:?} incompatible with input of {} features",
            w.shape(),
            cin
        )));
    }
    let cout = w.shape()[1];
    b.expect_shape(&[cout], "dense bias")?;
    let mut y = b.data().to_vec();
    for (c, &xv) in x.data().iter().enumerate() {
        axpy(xv, w.row(c), &mut y);
    }
    Tensor::from_vec(&[cout], y)
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (cin, cout) = (w.shape()[0], w.shape()[1]);
    let mut dx = Tensor::zeros(&[cin]);
    let mut dw = Tensor::zeros(&[cin, cout]);
    for c in 0..cin {
        dx.data_mut()[c] = dot(dy.data(), w.row(c));
        axpy(x.data()[c], dy.data(), dw.row_mut(c));
    }
    (dx, dw, dy.clone())
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// Per-timestep values cached by the LSTM forward pass for BPTT.
///
/// `gates` holds post-activation `[i, f, g, o]` per step; cells/hidden start
/// from `h0 = c0 = 0`.
pub struct LstmCache {
    pub input: Tensor,
    pub gates: Tensor,
    pub cells: Tensor,
    pub tanh_cells: Tensor,
    pub hidden: Tensor,
    pub return_sequences: bool,
}

/// Standard LSTM recurrence over a `T×Cin` sample.
///
/// Weights: `wx` is `Cin×4H`, `wh` is `H×4H`, `bias` is `4H`, gate order
/// `[i, f, g, o]`. Returns all hidden states (`T×H`) when `return_sequences`,
/// otherwise the final state (`H`).
pub fn lstm_forward(
    x: &Tensor,
    wx: &Tensor,
    wh: &Tensor,
    bias: &Tensor,
    return_sequences: bool,
) -> Result<(Tensor, LstmCache)> {
    let (t_len, cin) = (x.shape()[0], x.shape()[1]);
    if wx.shape().len() != 2 || wx.shape()[0] != cin {
        return Err(Error::ShapeMismatch(format!(
            "lstm input weights {:?} incompatible with input {:?}",
            wx.shape(),
            x.shape()
        )));
    }
    let h4 = wx.shape()[1];
    let h = h4 / 4;
    wh.expect_shape(&[h, h4], "lstm recurrent weights")?;
    bias.expect_shape(&[h4], "lstm bias")?;

    let mut gates = Tensor::zeros(&[t_len, h4]);
    let mut cells = Tensor::zeros(&[t_len, h]);
    let mut tanh_cells = Tensor::zeros(&[t_len, h]);
    let mut hidden = Tensor::zeros(&[t_len, h]);

    let mut preact = vec![0.0; h4];
    for t in 0..t_len {
        preact.copy_from_slice(bias.data());
        let xrow = x.row(t);
        for (c, &xv) in xrow.iter().enumerate() {
            axpy(xv, wx.row(c), &mut preact);
        }
        if t > 0 {
            let hprev = hidden.row(t - 1).to_vec();
            for (j, &hv) in hprev.iter().enumerate() {
                axpy(hv, wh.row(j), &mut preact);
            }
        }
        let grow = gates.row_mut(t);
        for j in 0..h {
            grow[j] = sigmoid_scalar(preact[j]); // i
            grow[h + j] = sigmoid_scalar(preact[h + j]); // f
            grow[2 * h + j] = preact[2 * h + j].tanh(); // g
            grow[3 * h + j] = sigmoid_scalar(preact[3 * h + j]); // o
        }
        for j in 0..h {
            let (i_g, f_g, g_g, o_g) = (
                gates.row(t)[j],
                gates.row(t)[h + j],
                gates.row(t)[2 * h + j],
                gates.row(t)[3 * h + j],
            );
            let c_prev = if t > 0 { cells.row(t - 1)[j] } else { 0.0 };
            let c_new = f_g * c_prev + i_g * g_g;
            cells.row_mut(t)[j] = c_new;
            let tc = c_new.tanh();
            tanh_cells.row_mut(t)[j] = tc;
            hidden.row_mut(t)[j] = o_g * tc;
        }
    }

    let output = if return_sequences {
        hidden.clone()
    } else {
        Tensor::from_vec(&[h], hidden.row(t_len - 1).to_vec()).unwrap()
    };
    Ok((
        output,
        LstmCache {
            input: x.clone(),
            gates,
            cells,
            tanh_cells,
            hidden,
            return_sequences,
        },
    ))
}

/// Backpropagation through time over the full window.
pub fn lstm_backward(
    cache: &LstmCache,
    wx: &Tensor,
    wh: &Tensor,
    dy: &Tensor,
) -> (Tensor, Tensor, Tensor, Tensor) {
    let (t_len, cin) = (cache.input.shape()[0], cache.input.shape()[1]);
    let h4 = wx.shape()[1];
    let h = h4 / 4;

    let mut dx = Tensor::zeros(&[t_len, cin]);
    let mut dwx = Tensor::zeros(&[cin, h4]);
    let mut dwh = Tensor::zeros(&[h, h4]);
    let mut db = Tensor::zeros(&[h4]);

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; h4];

    for t in (0..t_len).rev() {
        let mut dh: Vec<f64> = dh_next.clone();
        if cache.return_sequences {
            axpy(1.0, dy.row(t), &mut dh);
        } else if t == t_len - 1 {
            axpy(1.0, dy.data(), &mut dh);
        }

        let grow = cache.gates.row(t);
        let tc = cache.tanh_cells.row(t);
        for j in 0..h {
            let (i_g, f_g, g_g, o_g) = (grow[j], grow[h + j], grow[2 * h + j], grow[3 * h + j]);
            let c_prev = if t > 0 { cache.cells.row(t - 1)[j] } else { 0.0 };
            let do_ = dh[j] * tc[j];
            let dc = dc_next[j] + dh[j] * o_g * (1.0 - tc[j] * tc[j]);
            let di = dc * g_g;
            let df = dc * c_prev;
            let dg = dc * i_g;
            dc_next[j] = dc * f_g;
            da[j] = di * i_g * (1.0 - i_g);
            da[h + j] = df * f_g * (1.0 - f_g);
            da[2 * h + j] = dg * (1.0 - g_g * g_g);
            da[3 * h + j] = do_ * o_g * (1.0 - o_g);
        }

        let xrow = cache.input.row(t);
        for c in 0..cin {
            dx.row_mut(t)[c] = dot(&da, wx.row(c));
            axpy(xrow[c], &da, dwx.row_mut(c));
        }
        axpy(1.0, &da, db.data_mut());
        if t > 0 {
            let hprev = cache.hidden.row(t - 1);
            for j in 0..h {
                dh_next[j] = dot(&da, wh.row(j));
                axpy(hprev[j], &da, dwh.row_mut(j));
            }
        }
    }
    (dx, dwx, dwh, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t2(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::from_vec(&[rows, cols], data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_kernel_reproduces_input() {
        let x = t2(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let w = Tensor::from_vec(&[3, 1, 1], vec![0.0, 1.0, 0.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv1d_same(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_difference_kernel_matches_hand_result() {
        // Sliding dot product with [1, 0, -1] and zero padding.
        let x = t2(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let w = Tensor::from_vec(&[3, 1, 1], vec![1.0, 0.0, -1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv1d_same(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn conv_matches_naive_oracle() {
        // Brute-force re-computation with explicit zero padding.
        let mut rng = crate::nn::rng::DetRng::new(11);
        for &k in &[1usize, 2, 3, 4, 5] {
            let (t_len, cin, cout) = (7, 2, 3);
            let x = Tensor::from_vec(
                &[t_len, cin],
                (0..t_len * cin).map(|_| rng.uniform_symmetric(1.0)).collect(),
            )
            .unwrap();
            let w = Tensor::from_vec(
                &[k, cin, cout],
                (0..k * cin * cout).map(|_| rng.uniform_symmetric(1.0)).collect(),
            )
            .unwrap();
            let b = Tensor::from_vec(&[cout], (0..cout).map(|_| rng.uniform_symmetric(1.0)).collect())
                .unwrap();
            let y = conv1d_same(&x, &w, &b).unwrap();
            assert_eq!(y.shape(), &[t_len, cout]);
            let left = (k - 1) / 2;
            for t in 0..t_len {
                for o in 0..cout {
                    let mut acc = b.data()[o];
                    for kk in 0..k {
                        for c in 0..cin {
                            let s = t as isize + kk as isize - left as isize;
                            if s >= 0 && (s as usize) < t_len {
                                acc += x.row(s as usize)[c] * w.data()[(kk * cin + c) * cout + o];
                            }
                        }
                    }
                    assert_abs_diff_eq!(y.row(t)[o], acc, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_preserves_length_for_small_kernels() {
        for k in 1..=5usize {
            for t_len in 1..=64usize {
                let x = Tensor::zeros(&[t_len, 1]);
                let w = Tensor::zeros(&[k, 1, 1]);
                let b = Tensor::zeros(&[1]);
                let y = conv1d_same(&x, &w, &b).unwrap();
                assert_eq!(y.shape()[0], t_len, "K={k} T={t_len}");
            }
        }
    }

    #[test]
    fn batchnorm_two_value_channel() {
        // Channel values {-1, +1}: batch mean 0, population variance 1,
        // so normalized outputs are ±1/√(1+ε).
        let x = Tensor::from_vec(&[2, 1, 1], vec![-1.0, 1.0]).unwrap();
        let gamma = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let beta = Tensor::zeros(&[1]);
        let mut rm = Tensor::zeros(&[1]);
        let mut rv = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let (y, _) = batchnorm_forward_train(&x, &gamma, &beta, &mut rm, &mut rv).unwrap();
        let expected = 1.0 / (1.0 + BN_EPS).sqrt();
        assert_abs_diff_eq!(y.data()[0], -expected, epsilon = 1e-12);
        assert_abs_diff_eq!(y.data()[1], expected, epsilon = 1e-12);
    }

    #[test]
    fn batchnorm_zero_gamma_zeroes_output() {
        let x = Tensor::from_vec(&[1, 3, 1], vec![5.0, -2.0, 9.0]).unwrap();
        let gamma = Tensor::zeros(&[1]);
        let beta = Tensor::zeros(&[1]);
        let mut rm = Tensor::zeros(&[1]);
        let mut rv = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let (y, _) = batchnorm_forward_train(&x, &gamma, &beta, &mut rm, &mut rv).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batchnorm_constant_channel_returns_beta() {
        let x = Tensor::from_vec(&[1, 4, 1], vec![3.0; 4]).unwrap();
        let gamma = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let beta = Tensor::from_vec(&[1], vec![5.0]).unwrap();
        let mut rm = Tensor::zeros(&[1]);
        let mut rv = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let (y, _) = batchnorm_forward_train(&x, &gamma, &beta, &mut rm, &mut rv).unwrap();
        for &v in y.data() {
            assert_abs_diff_eq!(v, 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn batchnorm_normalized_moments() {
        // Pre-scale values must have mean ~0 and population variance within
        // 1e-6 of s²/(s²+ε) for a non-degenerate batch with raw variance s².
        let mut rng = crate::nn::rng::DetRng::new(5);
        let x = Tensor::from_vec(&[8, 4, 3], (0..96).map(|_| rng.uniform_in(-3.0, 7.0)).collect())
            .unwrap();
        let gamma = Tensor::from_vec(&[3], vec![1.0; 3]).unwrap();
        let beta = Tensor::zeros(&[3]);
        let mut rm = Tensor::zeros(&[3]);
        let mut rv = Tensor::from_vec(&[3], vec![1.0; 3]).unwrap();
        let (_, cache) = batchnorm_forward_train(&x, &gamma, &beta, &mut rm, &mut rv).unwrap();
        let c = 3;
        let n = cache.xhat.len() / c;
        for ch in 0..c {
            let raw: Vec<f64> = x.data().iter().skip(ch).step_by(c).copied().collect();
            let raw_mean: f64 = raw.iter().sum::<f64>() / n as f64;
            let raw_var: f64 =
                raw.iter().map(|v| (v - raw_mean) * (v - raw_mean)).sum::<f64>() / n as f64;
            let vals: Vec<f64> = cache.xhat.data().iter().skip(ch).step_by(c).copied().collect();
            let mean: f64 = vals.iter().sum::<f64>() / n as f64;
            let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let expected = raw_var / (raw_var + BN_EPS);
            assert!(mean.abs() <= 1e-9, "channel {ch} mean {mean}");
            assert!((var - expected).abs() <= 1e-6, "channel {ch} var {var} vs {expected}");
            assert!(var <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn relu_and_sigmoid_pointwise() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let z = Tensor::from_vec(&[2], vec![0.0, 3f64.ln()]).unwrap();
        let s = sigmoid(&z);
        assert_abs_diff_eq!(s.data()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.data()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn maxpool_drops_odd_tail_and_routes_ties_left() {
        let x = t2(5, 1, &[1.0, 3.0, 2.0, 2.0, 5.0]);
        let (y, argmax) = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
        // tie (2, 2) goes to the earlier frame
        assert_eq!(argmax, vec![1, 2]);
        let dy = Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap();
        let dx = maxpool1d_backward(&argmax, 5, &dy);
        assert_eq!(dx.data(), &[0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_rejects_short_input() {
        let x = t2(1, 1, &[1.0]);
        assert!(maxpool1d(&x, 2).is_err());
    }

    #[test]
    fn global_avg_pool_means_channels() {
        let x = t2(4, 1, &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(global_avg_pool(&x).data(), &[3.0]);
        let single = t2(1, 2, &[4.0, 9.0]);
        assert_eq!(global_avg_pool(&single).data(), &[4.0, 9.0]);
    }

    #[test]
    fn dense_affine_map() {
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let w = t2(2, 1, &[3.0, 4.0]);
        let b = Tensor::from_vec(&[1], vec![5.0]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap().data(), &[16.0]);
        let id = t2(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b2 = Tensor::zeros(&[2]);
        assert_eq!(dense(&x, &id, &b2).unwrap().data(), x.data());
        let zero_w = Tensor::zeros(&[2, 1]);
        assert_eq!(dense(&x, &zero_w, &b).unwrap().data(), b.data());
    }

    #[test]
    fn lstm_zero_weights_zero_output() {
        let x = t2(4, 2, &[0.3; 8]);
        let wx = Tensor::zeros(&[2, 12]);
        let wh = Tensor::zeros(&[3, 12]);
        let b = Tensor::zeros(&[12]);
        let (y, _) = lstm_forward(&x, &wx, &wh, &b, true).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_scalar_reference_step() {
        // H=1, Cin=1, one step: W=U=0 except the candidate-path input weight,
        // gate biases (i, f, o) = 10, x = 1.
        let x = t2(1, 1, &[1.0]);
        let wx = Tensor::from_vec(&[1, 4], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let wh = Tensor::zeros(&[1, 4]);
        let b = Tensor::from_vec(&[4], vec![10.0, 10.0, 0.0, 10.0]).unwrap();
        let (y, cache) = lstm_forward(&x, &wx, &wh, &b, false).unwrap();
        let sig10 = sigmoid_scalar(10.0);
        let c1 = sig10 * 1f64.tanh();
        let h1 = sig10 * c1.tanh();
        assert_abs_diff_eq!(cache.cells.data()[0], c1, epsilon = 1e-12);
        assert_abs_diff_eq!(y.data()[0], h1, epsilon = 1e-12);
        // within rounding of the idealized 0.7616 / 0.6421
        assert_abs_diff_eq!(c1, 0.7616, epsilon = 1e-3);
        assert_abs_diff_eq!(h1, 0.6421, epsilon = 1e-3);
    }

    #[test]
    fn lstm_outputs_bounded() {
        let mut rng = crate::nn::rng::DetRng::new(9);
        let x = Tensor::from_vec(&[10, 3], (0..30).map(|_| rng.uniform_in(-50.0, 50.0)).collect())
            .unwrap();
        let wx = Tensor::from_vec(&[3, 20], (0..60).map(|_| rng.uniform_symmetric(2.0)).collect())
            .unwrap();
        let wh = Tensor::from_vec(&[5, 20], (0..100).map(|_| rng.uniform_symmetric(2.0)).collect())
            .unwrap();
        let b = Tensor::from_vec(&[20], (0..20).map(|_| rng.uniform_symmetric(2.0)).collect()).unwrap();
        let (y, _) = lstm_forward(&x, &wx, &wh, &b, true).unwrap();
        assert!(y.data().iter().all(|&v| v > -1.0 && v < 1.0));
    }
}
