//! Batched forward/backward kernels for the fixed layer set.
//!
//! All buffers are dense row-major with the batch as the leading dimension.

use crate::tensor::{gemm, Scalar, Trans};

pub(crate) fn dense_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    weight: &[T],
    bias: &[T],
    inputs: usize,
    outputs: usize,
) -> Vec<T> {
    let mut y = Vec::with_capacity(batch * outputs);
    for _ in 0..batch {
        y.extend_from_slice(bias);
    }
    gemm(batch, inputs, outputs, x, Trans::No, weight, Trans::Yes, T::one(), &mut y);
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    weight: &[T],
    batch: usize,
    inputs: usize,
    outputs: usize,
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    gemm(outputs, batch, inputs, dy, Trans::Yes, x, Trans::No, T::zero(), dweight);
    dbias.fill(T::zero());
    for row in dy.chunks_exact(outputs) {
        for (d, g) in dbias.iter_mut().zip(row) {
            *d = *d + *g;
        }
    }
    need_dx.then(|| {
        let mut dx = vec![T::zero(); batch * inputs];
        gemm(batch, outputs, inputs, dy, Trans::No, weight, Trans::No, T::zero(), &mut dx);
        dx
    })
}

/// Geometry of a valid stride-1 convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.height - self.kernel + 1
    }
    pub fn out_w(&self) -> usize {
        self.width - self.kernel + 1
    }
    pub fn patch(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }
    pub fn in_volume(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Unrolls the batch into a `[patch, batch * positions]` matrix.
fn im2col<T: Scalar>(x: &[T], batch: usize, g: &ConvGeom) -> Vec<T> {
    let (oh, ow, k) = (g.out_h(), g.out_w(), g.kernel);
    let cols = batch * g.positions();
    let mut col = vec![T::zero(); g.patch() * cols];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst_row = &mut col[row * cols..(row + 1) * cols];
                for b in 0..batch {
                    let img = &x[b * g.in_volume() + c * g.height * g.width..];
                    let dst = &mut dst_row[b * oh * ow..(b + 1) * oh * ow];
                    for oy in 0..oh {
                        let src = &img[(oy + ky) * g.width + kx..][..ow];
                        dst[oy * ow..(oy + 1) * ow].copy_from_slice(src);
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(col: &[T], batch: usize, g: &ConvGeom) -> Vec<T> {
    let (oh, ow, k) = (g.out_h(), g.out_w(), g.kernel);
    let cols = batch * g.positions();
    let mut dx = vec![T::zero(); batch * g.in_volume()];
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src_row = &col[row * cols..(row + 1) * cols];
                for b in 0..batch {
                    let img = &mut dx[b * g.in_volume() + c * g.height * g.width..];
                    let src = &src_row[b * oh * ow..(b + 1) * oh * ow];
                    for oy in 0..oh {
                        let dst = &mut img[(oy + ky) * g.width + kx..][..ow];
                        for (d, s) in dst.iter_mut().zip(&src[oy * ow..(oy + 1) * ow]) {
                            *d = *d + *s;
                        }
                    }
                }
            }
        }
    }
    dx
}

pub(crate) fn conv_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    weight: &[T],
    bias: &[T],
) -> Vec<T> {
    let p = g.positions();
    let cols = batch * p;
    let col = im2col(x, batch, g);
    // [out_channels, batch * positions]
    let mut tmp = vec![T::zero(); g.out_channels * cols];
    gemm(g.out_channels, g.patch(), cols, weight, Trans::No, &col, Trans::No, T::zero(), &mut tmp);
    let mut y = vec![T::zero(); batch * g.out_channels * p];
    for oc in 0..g.out_channels {
        let bias = bias[oc];
        for b in 0..batch {
            let src = &tmp[oc * cols + b * p..][..p];
            let dst = &mut y[(b * g.out_channels + oc) * p..][..p];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = *s + bias;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    batch: usize,
    g: &ConvGeom,
    weight: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    let p = g.positions();
    let cols = batch * p;
    // Regroup dy from [batch, oc, p] to [oc, batch * p].
    let mut dyp = vec![T::zero(); g.out_channels * cols];
    for b in 0..batch {
        for oc in 0..g.out_channels {
            let src = &dy[(b * g.out_channels + oc) * p..][..p];
            dyp[oc * cols + b * p..][..p].copy_from_slice(src);
        }
    }
    for (oc, db) in dbias.iter_mut().enumerate() {
        *db = dyp[oc * cols..(oc + 1) * cols]
            .iter()
            .fold(T::zero(), |acc, v| acc + *v);
    }
    let col = im2col(x, batch, g);
    gemm(g.out_channels, cols, g.patch(), &dyp, Trans::No, &col, Trans::Yes, T::zero(), dweight);
    need_dx.then(|| {
        let mut dcol = vec![T::zero(); g.patch() * cols];
        gemm(g.patch(), g.out_channels, cols, weight, Trans::Yes, &dyp, Trans::No, T::zero(), &mut dcol);
        col2im(&dcol, batch, g)
    })
}

pub(crate) fn maxpool_forward<T: Scalar>(x: &[T], batch: usize, shape: [usize; 3]) -> Vec<T> {
    let [c, h, w] = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(batch * c * oh * ow);
    for plane in x.chunks_exact(h * w).take(batch * c) {
        for oy in 0..oh {
            for ox in 0..ow {
                let i = 2 * oy * w + 2 * ox;
                let m = plane[i].max(plane[i + 1]).max(plane[i + w]).max(plane[i + w + 1]);
                y.push(m);
            }
        }
    }
    y
}

/// Routes each pooled gradient to the first maximal input of its window.
pub(crate) fn maxpool_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    batch: usize,
    shape: [usize; 3],
) -> Vec<T> {
    let [c, h, w] = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = vec![T::zero(); x.len()];
    for pi in 0..batch * c {
        let plane = &x[pi * h * w..(pi + 1) * h * w];
        let grads = &dy[pi * oh * ow..(pi + 1) * oh * ow];
        let dplane = &mut dx[pi * h * w..(pi + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let i = 2 * oy * w + 2 * ox;
                let mut best = i;
                for j in [i + 1, i + w, i + w + 1] {
                    if plane[j] > plane[best] {
                        best = j;
                    }
                }
                dplane[best] = dplane[best] + grads[oy * ow + ox];
            }
        }
    }
    dx
}

pub(crate) fn relu_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

pub(crate) fn relu_backward<T: Scalar>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter()
        .zip(dy)
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect()
}

/// Multiplies every row of `x` elementwise by `gains`; used both ways.
pub(crate) fn scale_rows<T: Scalar>(x: &[T], gains: &[T]) -> Vec<T> {
    let mut y = x.to_vec();
    for row in y.chunks_exact_mut(gains.len()) {
        for (v, g) in row.iter_mut().zip(gains) {
            *v = *v * *g;
        }
    }
    y
}
