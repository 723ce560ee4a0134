//! Pure forward/backward kernels.
//!
//! All kernels accumulate `f32` terms in a fixed ascending order so results
//! are reproducible bit-for-bit and the convolutions agree exactly with a
//! naive nested-loop evaluation. Loss reductions are the exception: they
//! accumulate in `f64` and report both precisions.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;
use crate::PROB_EPS;

/// `c[m x n] += a[m x k] * b[k x n]`, row-major, k ascending per output cell.
pub fn gemm_acc(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ip * bv;
            }
        }
    }
}

fn transpose(rows: usize, cols: usize, src: &[f32], dst: &mut [f32]) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

pub fn conv2d_out_dims(
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(TensorError::Contract("conv stride must be positive".into()));
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(TensorError::Contract(format!(
            "kernel {kh}x{kw} exceeds padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    Ok((
        (h + 2 * pad - kh) / stride + 1,
        (w + 2 * pad - kw) / stride + 1,
    ))
}

/// Unfolds one image into a `[c*kh*kw, oh*ow]` patch matrix, zero-padded.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [f32],
) {
    let n = oh * ow;
    let mut row = 0usize;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let seg = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        seg.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, out) in seg.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        *out = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds a patch-matrix gradient back onto the image.
#[allow(clippy::too_many_arguments)]
fn col2im_acc(
    cols: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    dx: &mut [f32],
) {
    let n = oh * ow;
    let mut row = 0usize;
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Cross-correlation of `x [B,C,H,W]` with `weight [F,C,kh,kw]`.
pub fn conv2d_fwd(x: &Tensor, weight: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let (f, wc, kh, kw) = weight.dims4()?;
    if wc != c {
        return Err(TensorError::ShapeMismatch(format!(
            "conv kernel expects {wc} input channels, input has {c}"
        )));
    }
    let (oh, ow) = conv2d_out_dims(h, w, kh, kw, stride, pad)?;
    let k = c * kh * kw;
    let n = oh * ow;
    let mut cols = vec![0.0f32; k * n];
    let mut out = vec![0.0f32; b * f * n];
    for bi in 0..b {
        im2col(
            &x.data()[bi * c * h * w..(bi + 1) * c * h * w],
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            oh,
            ow,
            &mut cols,
        );
        gemm_acc(
            f,
            k,
            n,
            weight.data(),
            &cols,
            &mut out[bi * f * n..(bi + 1) * f * n],
        );
    }
    Tensor::new(vec![b, f, oh, ow], out)
}

/// Gradients of conv2d w.r.t. input and kernel given the output gradient.
pub fn conv2d_bwd(
    x: &Tensor,
    weight: &Tensor,
    stride: usize,
    pad: usize,
    dy: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (b, c, h, w) = x.dims4()?;
    let (f, _, kh, kw) = weight.dims4()?;
    let (oh, ow) = conv2d_out_dims(h, w, kh, kw, stride, pad)?;
    let k = c * kh * kw;
    let n = oh * ow;
    let mut cols = vec![0.0f32; k * n];
    let mut cols_t = vec![0.0f32; n * k];
    let mut dcols = vec![0.0f32; k * n];
    let mut dx = Tensor::zeros(vec![b, c, h, w]);
    let mut dw = Tensor::zeros(vec![f, c, kh, kw]);
    for bi in 0..b {
        im2col(
            &x.data()[bi * c * h * w..(bi + 1) * c * h * w],
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            oh,
            ow,
            &mut cols,
        );
        transpose(k, n, &cols, &mut cols_t);
        let dy_item = &dy.data()[bi * f * n..(bi + 1) * f * n];
        // dW += dY * cols^T
        gemm_acc(f, n, k, dy_item, &cols_t, dw.data_mut());
        // dcols = W^T * dY, scattered back onto the image
        dcols.fill(0.0);
        for fi in 0..f {
            let w_row = &weight.data()[fi * k..(fi + 1) * k];
            let dy_row = &dy_item[fi * n..(fi + 1) * n];
            for (p, &wv) in w_row.iter().enumerate() {
                let dst = &mut dcols[p * n..(p + 1) * n];
                for (dv, &gv) in dst.iter_mut().zip(dy_row) {
                    *dv += wv * gv;
                }
            }
        }
        col2im_acc(
            &dcols,
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            oh,
            ow,
            &mut dx.data_mut()[bi * c * h * w..(bi + 1) * c * h * w],
        );
    }
    Ok((dx, dw))
}

// ---------------------------------------------------------------------------
// Pooling and activations
// ---------------------------------------------------------------------------

/// Max pooling; ties resolve to the first (row-major) maximum.
pub fn maxpool2d_fwd(x: &Tensor, k: usize, stride: usize) -> Result<(Tensor, Vec<u32>)> {
    let (b, c, h, w) = x.dims4()?;
    if k == 0 || stride == 0 || k > h || k > w {
        return Err(TensorError::Contract(format!(
            "pool window {k} stride {stride} invalid for {h}x{w}"
        )));
    }
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = vec![0.0f32; b * c * oh * ow];
    let mut argmax = vec![0u32; b * c * oh * ow];
    for bc in 0..b * c {
        let plane = &x.data()[bc * h * w..(bc + 1) * h * w];
        let out_plane = &mut out[bc * oh * ow..(bc + 1) * oh * ow];
        let arg_plane = &mut argmax[bc * oh * ow..(bc + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ky in 0..k {
                    let iy = oy * stride + ky;
                    for kx in 0..k {
                        let ix = ox * stride + kx;
                        let v = plane[iy * w + ix];
                        if v > best {
                            best = v;
                            best_idx = iy * w + ix;
                        }
                    }
                }
                out_plane[oy * ow + ox] = best;
                arg_plane[oy * ow + ox] = best_idx as u32;
            }
        }
    }
    Ok((Tensor::new(vec![b, c, oh, ow], out)?, argmax))
}

pub fn maxpool2d_bwd(x_shape: &[usize], out_shape: &[usize], argmax: &[u32], dy: &[f32]) -> Tensor {
    let (h, w) = (x_shape[2], x_shape[3]);
    let per_plane_out = out_shape[2] * out_shape[3];
    let mut dx = Tensor::zeros(x_shape.to_vec());
    let planes = x_shape[0] * x_shape[1];
    for bc in 0..planes {
        let dst = &mut dx.data_mut()[bc * h * w..(bc + 1) * h * w];
        for i in 0..per_plane_out {
            let flat = bc * per_plane_out + i;
            dst[argmax[flat] as usize] += dy[flat];
        }
    }
    dx
}

pub fn relu_fwd(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

pub fn relu_bwd(x: &Tensor, dy: &[f32]) -> Vec<f32> {
    x.data()
        .iter()
        .zip(dy)
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect()
}

// ---------------------------------------------------------------------------
// Linear algebra on 2-d tensors
// ---------------------------------------------------------------------------

/// `x [B,D] * w [D,K] -> [B,K]`
pub fn matmul_fwd(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    let (bsz, d) = x.dims2()?;
    let (wd, k) = w.dims2()?;
    if d != wd {
        return Err(TensorError::ShapeMismatch(format!(
            "matmul inner dims differ: {d} vs {wd}"
        )));
    }
    let mut out = vec![0.0f32; bsz * k];
    gemm_acc(bsz, d, k, x.data(), w.data(), &mut out);
    Tensor::new(vec![bsz, k], out)
}

pub fn matmul_bwd(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<(Tensor, Tensor)> {
    let (bsz, d) = x.dims2()?;
    let (_, k) = w.dims2()?;
    let mut w_t = vec![0.0f32; k * d];
    transpose(d, k, w.data(), &mut w_t);
    let mut dx = vec![0.0f32; bsz * d];
    gemm_acc(bsz, k, d, dy.data(), &w_t, &mut dx);
    let mut x_t = vec![0.0f32; d * bsz];
    transpose(bsz, d, x.data(), &mut x_t);
    let mut dw = vec![0.0f32; d * k];
    gemm_acc(d, bsz, k, &x_t, dy.data(), &mut dw);
    Ok((Tensor::new(vec![bsz, d], dx)?, Tensor::new(vec![d, k], dw)?))
}

/// Adds `bias [K]` to every row of `x [B,K]`.
pub fn add_row_bias_fwd(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, k) = x.dims2()?;
    if bias.numel() != k {
        return Err(TensorError::ShapeMismatch(format!(
            "row bias length {} vs {k} columns",
            bias.numel()
        )));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(out)
}

pub fn row_bias_grad(k: usize, dy: &[f32]) -> Vec<f32> {
    let mut db = vec![0.0f32; k];
    for row in dy.chunks_exact(k) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    db
}

/// Adds `bias [C]` to every spatial position of `x [B,C,H,W]`.
pub fn add_chan_bias_fwd(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, c, h, w) = x.dims4()?;
    if bias.numel() != c {
        return Err(TensorError::ShapeMismatch(format!(
            "channel bias length {} vs {c} channels",
            bias.numel()
        )));
    }
    let mut out = x.clone();
    let plane = h * w;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v += bias.data()[(i / plane) % c];
    }
    Ok(out)
}

pub fn chan_bias_grad(c: usize, plane: usize, dy: &[f32]) -> Vec<f32> {
    let mut db = vec![0.0f32; c];
    for (i, &g) in dy.iter().enumerate() {
        db[(i / plane) % c] += g;
    }
    db
}

/// Gathers rows of `x [B,D]` by index into `[n,D]`.
pub fn gather_rows_fwd(x: &Tensor, idx: &[u32]) -> Result<Tensor> {
    let (bsz, d) = x.dims2()?;
    let mut out = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        let i = i as usize;
        if i >= bsz {
            return Err(TensorError::Contract(format!(
                "gather index {i} out of range for {bsz} rows"
            )));
        }
        out.extend_from_slice(&x.data()[i * d..(i + 1) * d]);
    }
    Tensor::new(vec![idx.len(), d], out)
}

pub fn gather_rows_bwd(bsz: usize, d: usize, idx: &[u32], dy: &[f32]) -> Vec<f32> {
    let mut dx = vec![0.0f32; bsz * d];
    for (r, &i) in idx.iter().enumerate() {
        let dst = &mut dx[i as usize * d..(i as usize + 1) * d];
        for (v, &g) in dst.iter_mut().zip(&dy[r * d..(r + 1) * d]) {
            *v += g;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Softmax and losses
// ---------------------------------------------------------------------------

/// Row-wise softmax with max subtraction; rejects non-finite input.
pub fn softmax_fwd(logits: &Tensor) -> Result<Tensor> {
    let (_, k) = logits.dims2()?;
    if k < 2 {
        return Err(TensorError::Contract(
            "softmax needs at least 2 classes".into(),
        ));
    }
    if !logits.is_finite() {
        return Err(TensorError::NonFinite("softmax input".into()));
    }
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let m = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f64;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v as f64;
        }
        for v in row.iter_mut() {
            *v = (*v as f64 / sum) as f32;
        }
    }
    Ok(out)
}

/// `dz = p * (g - <g, p>)` per row.
pub fn softmax_bwd(p: &Tensor, dy: &[f32]) -> Vec<f32> {
    let k = p.shape()[1];
    let mut dz = vec![0.0f32; p.numel()];
    for (r, row) in p.data().chunks_exact(k).enumerate() {
        let g_row = &dy[r * k..(r + 1) * k];
        let dot: f64 = row
            .iter()
            .zip(g_row)
            .map(|(&pv, &gv)| pv as f64 * gv as f64)
            .sum();
        for (j, (&pv, &gv)) in row.iter().zip(g_row).enumerate() {
            dz[r * k + j] = pv * (gv - dot as f32);
        }
    }
    dz
}

fn check_rows_sum_to_one(t: &Tensor, what: &str) -> Result<()> {
    let (_, k) = t.dims2()?;
    for (r, row) in t.data().chunks_exact(k).enumerate() {
        let s: f64 = row.iter().map(|&v| v as f64).sum();
        if (s - 1.0).abs() > 1e-5 {
            return Err(TensorError::Contract(format!(
                "{what} row {r} sums to {s}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Mean over the batch of `-sum_k q_k ln(max(p_k, eps))`, accumulated in f64.
pub fn cross_entropy_mean(p: &Tensor, q: &Tensor) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(TensorError::ShapeMismatch(format!(
            "cross-entropy shapes {:?} vs {:?}",
            p.shape(),
            q.shape()
        )));
    }
    check_rows_sum_to_one(p, "p")?;
    check_rows_sum_to_one(q, "q")?;
    let (b, _) = p.dims2()?;
    let mut total = 0.0f64;
    for (&pv, &qv) in p.data().iter().zip(q.data()) {
        if qv != 0.0 {
            total -= qv as f64 * (pv.max(PROB_EPS) as f64).ln();
        }
    }
    Ok(total / b as f64)
}

/// Gradient of [`cross_entropy_mean`] w.r.t. `p` and `q`, scaled by `g`.
pub fn cross_entropy_bwd(p: &Tensor, q: &Tensor, g: f32) -> (Vec<f32>, Vec<f32>) {
    let b = p.shape()[0] as f32;
    let scale = g / b;
    let mut dp = vec![0.0f32; p.numel()];
    let mut dq = vec![0.0f32; q.numel()];
    for (i, (&pv, &qv)) in p.data().iter().zip(q.data()).enumerate() {
        let pc = pv.max(PROB_EPS);
        if pv > PROB_EPS && qv != 0.0 {
            dp[i] = -scale * qv / pc;
        }
        dq[i] = -scale * pc.ln();
    }
    (dp, dq)
}

/// Elementwise `ln(max(x, eps))`.
pub fn log_clamped_fwd(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(PROB_EPS).ln()).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

pub fn log_clamped_bwd(x: &Tensor, dy: &[f32]) -> Vec<f32> {
    x.data()
        .iter()
        .zip(dy)
        .map(|(&v, &g)| if v > PROB_EPS { g / v } else { 0.0 })
        .collect()
}

pub fn sum_all(x: &Tensor) -> f64 {
    x.data().iter().map(|&v| v as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f32>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    /// Naive 6-nested-loop convolution used as the independent oracle.
    fn conv_oracle(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (b, c, h, wd) = x.dims4().unwrap();
        let (f, _, kh, kw) = w.dims4().unwrap();
        let (oh, ow) = conv2d_out_dims(h, wd, kh, kw, stride, pad).unwrap();
        let mut out = Tensor::zeros(vec![b, f, oh, ow]);
        for bi in 0..b {
            for fi in 0..f {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0f32;
                        for ci in 0..c {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    let xv = if iy < 0
                                        || ix < 0
                                        || iy >= h as isize
                                        || ix >= wd as isize
                                    {
                                        0.0
                                    } else {
                                        x.data()
                                            [((bi * c + ci) * h + iy as usize) * wd + ix as usize]
                                    };
                                    acc += xv * w.data()[((fi * c + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        out.data_mut()[((bi * f + fi) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_ones_two_by_two() {
        let x = Tensor::full(vec![1, 1, 3, 3], 1.0);
        let w = Tensor::full(vec![1, 1, 2, 2], 1.0);
        let y = conv2d_fwd(&x, &w, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn conv_identity_kernel_same_pad() {
        let x = t(vec![1, 1, 4, 4], (0..16).map(|v| v as f32 * 0.25).collect());
        let mut w = Tensor::zeros(vec![1, 1, 3, 3]);
        w.data_mut()[4] = 1.0; // center tap
        let y = conv2d_fwd(&x, &w, 1, 1).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_matches_loop_oracle_exactly() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(7);
        for trial in 0..20 {
            let stride = 1 + trial % 2;
            let pad = trial % 3;
            let x = t(
                vec![1, 2, 4, 4],
                (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let w = t(
                vec![3, 2, 3, 3],
                (0..54).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let fast = conv2d_fwd(&x, &w, stride, pad).unwrap();
            let slow = conv_oracle(&x, &w, stride, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert_eq!(a, b, "stride={stride} pad={pad}");
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(vec![1, 1, 3, 3]);
        let w = Tensor::zeros(vec![1, 1, 5, 5]);
        assert!(conv2d_fwd(&x, &w, 1, 0).is_err());
    }

    #[test]
    fn maxpool_matches_loop_oracle() {
        let x = t(
            vec![1, 1, 4, 4],
            vec![
                1.0, 2.0, 5.0, 3.0, //
                0.0, 4.0, 1.0, 2.0, //
                7.0, 0.0, 3.0, 3.0, //
                1.0, 6.0, 2.0, 9.0,
            ],
        );
        let (y, arg) = maxpool2d_fwd(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0, 5.0, 7.0, 9.0]);
        // tie in the last window would pick the first occurrence
        let dy = vec![1.0, 1.0, 1.0, 1.0];
        let dx = maxpool2d_bwd(x.shape(), y.shape(), &arg, &dy);
        let mut expect = vec![0.0f32; 16];
        expect[5] = 1.0;
        expect[2] = 1.0;
        expect[8] = 1.0;
        expect[15] = 1.0;
        assert_eq!(dx.data(), expect.as_slice());
    }

    #[test]
    fn matmul_small_exact() {
        let x = t(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = t(vec![3, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = matmul_fwd(&x, &w).unwrap();
        assert_eq!(y.data(), &[4.0, 5.0, 10.0, 11.0]);
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let y = softmax_fwd(&t(vec![1, 3], vec![0.0, 0.0, 0.0])).unwrap();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_saturates_without_overflow() {
        let y = softmax_fwd(&t(vec![1, 2], vec![1000.0, 0.0])).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-6);
        assert!(y.data()[1].abs() < 1e-6);
        assert!(y.is_finite());
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let r = softmax_fwd(&t(vec![1, 2], vec![f32::NAN, 0.0]));
        assert!(matches!(r, Err(TensorError::NonFinite(_))));
    }

    #[test]
    fn softmax_known_row() {
        // Oracle: direct f64 evaluation of exp(z_k)/sum_j exp(z_j).
        let z = [1.0f64, 2.0, 3.0];
        let s: f64 = z.iter().map(|v| v.exp()).sum();
        let expect: Vec<f64> = z.iter().map(|v| v.exp() / s).collect();
        let y = softmax_fwd(&t(vec![1, 3], vec![1.0, 2.0, 3.0])).unwrap();
        for (a, e) in y.data().iter().zip(&expect) {
            assert!((*a as f64 - e).abs() < 1e-4);
        }
        // frozen values from the oracle
        assert!((y.data()[0] - 0.09003).abs() < 1e-4);
        assert!((y.data()[1] - 0.24473).abs() < 1e-4);
        assert!((y.data()[2] - 0.66524).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_known_values() {
        let one_hot = t(vec![1, 2], vec![1.0, 0.0]);
        assert!(cross_entropy_mean(&one_hot, &one_hot).unwrap().abs() < 1e-9);

        let p = t(vec![1, 2], vec![0.5, 0.5]);
        let q = t(vec![1, 2], vec![1.0, 0.0]);
        let ce = cross_entropy_mean(&p, &q).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-4);

        // Oracle: -sum q_i ln p_i in f64 = 0.695594 for p=[0.7,0.3], q=[0.6,0.4].
        let p = t(vec![1, 2], vec![0.7, 0.3]);
        let q = t(vec![1, 2], vec![0.6, 0.4]);
        let oracle = -(0.6 * 0.7f64.ln() + 0.4 * 0.3f64.ln());
        let ce = cross_entropy_mean(&p, &q).unwrap();
        assert!((ce - oracle).abs() < 1e-6);
        assert!((ce - 0.695594).abs() < 1e-3);
    }

    #[test]
    fn cross_entropy_shape_and_sum_contracts() {
        let p = t(vec![1, 2], vec![0.5, 0.5]);
        let q3 = t(vec![1, 3], vec![0.4, 0.3, 0.3]);
        assert!(matches!(
            cross_entropy_mean(&p, &q3),
            Err(TensorError::ShapeMismatch(_))
        ));
        let bad = t(vec![1, 2], vec![0.9, 0.4]);
        assert!(matches!(
            cross_entropy_mean(&bad, &p),
            Err(TensorError::Contract(_))
        ));
    }

    #[test]
    fn gather_rows_roundtrip() {
        let x = t(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = gather_rows_fwd(&x, &[2, 0]).unwrap();
        assert_eq!(y.data(), &[5.0, 6.0, 1.0, 2.0]);
        let dx = gather_rows_bwd(3, 2, &[2, 0], &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(dx, vec![2.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        assert!(gather_rows_fwd(&x, &[3]).is_err());
    }
}
