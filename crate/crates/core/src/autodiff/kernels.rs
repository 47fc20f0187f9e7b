//! Dense convolution kernels lowered onto GEMM through im2col.
//!
//! All activations are NCHW. Convolution weights are `(c_out, c_in, k, k)`;
//! transposed-convolution weights follow the `(c_in, c_out, k, k)` convention.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

/// Spatial geometry of a square-kernel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }
}

pub(crate) fn conv_out_len(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

pub(crate) fn conv_transpose_out_len(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Option<usize> {
    ((input - 1) * stride + kernel + output_pad).checked_sub(2 * pad)
}

/// C = alpha * op(A) * op(B) + beta * C with row-major slices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    let a_view = if a_trans {
        ArrayView2::from_shape((k, m), a).unwrap().reversed_axes()
    } else {
        ArrayView2::from_shape((m, k), a).unwrap()
    };
    let b_view = if b_trans {
        ArrayView2::from_shape((n, k), b).unwrap().reversed_axes()
    } else {
        ArrayView2::from_shape((k, n), b).unwrap()
    };
    let mut c_view = ArrayViewMut2::from_shape((m, n), c).unwrap();
    general_mat_mul(1.0, &a_view, &b_view, beta, &mut c_view);
}

/// Unfolds patches into a `(c*k*k, batch*out_h*out_w)` matrix.
pub(crate) fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let cols_n = g.col_cols();
    let plane = g.out_h * g.out_w;
    let mut cols = vec![0.0; g.col_rows() * cols_n];
    for c in 0..g.channels {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let dst_row = &mut cols[row * cols_n..(row + 1) * cols_n];
                for n in 0..g.batch {
                    let src = &x[(n * g.channels + c) * g.height * g.width..][..g.height * g.width];
                    let dst = &mut dst_row[n * plane..(n + 1) * plane];
                    for oi in 0..g.out_h {
                        let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                        if ii < 0 || ii >= g.height as isize {
                            continue;
                        }
                        let src_row = &src[ii as usize * g.width..][..g.width];
                        for oj in 0..g.out_w {
                            let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                            if jj >= 0 && jj < g.width as isize {
                                dst[oi * g.out_w + oj] = src_row[jj as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds columns back, summing overlaps.
pub(crate) fn col2im(cols: &[f64], g: &ConvGeom) -> Vec<f64> {
    let cols_n = g.col_cols();
    let plane = g.out_h * g.out_w;
    let mut x = vec![0.0; g.batch * g.channels * g.height * g.width];
    for c in 0..g.channels {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let src_row = &cols[row * cols_n..(row + 1) * cols_n];
                for n in 0..g.batch {
                    let dst =
                        &mut x[(n * g.channels + c) * g.height * g.width..][..g.height * g.width];
                    let src = &src_row[n * plane..(n + 1) * plane];
                    for oi in 0..g.out_h {
                        let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                        if ii < 0 || ii >= g.height as isize {
                            continue;
                        }
                        let dst_row = &mut dst[ii as usize * g.width..][..g.width];
                        for oj in 0..g.out_w {
                            let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                            if jj >= 0 && jj < g.width as isize {
                                dst_row[jj as usize] += src[oi * g.out_w + oj];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `(batch, c, p)` activations to a `(c, batch*p)` matrix.
pub(crate) fn nchw_to_cm(x: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for n in 0..batch {
        for c in 0..channels {
            let src = &x[(n * channels + c) * plane..][..plane];
            out[c * batch * plane + n * plane..][..plane].copy_from_slice(src);
        }
    }
    out
}

/// Inverse of [`nchw_to_cm`].
pub(crate) fn cm_to_nchw(m: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for n in 0..batch {
        for c in 0..channels {
            let src = &m[c * batch * plane + n * plane..][..plane];
            out[(n * channels + c) * plane..][..plane].copy_from_slice(src);
        }
    }
    out
}

pub(crate) struct ConvGrads {
    pub input: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Forward convolution. `geom` describes the input side.
pub(crate) fn conv2d_forward(x: &[f64], w: &[f64], b: &[f64], c_out: usize, geom: &ConvGeom) -> Vec<f64> {
    let cols = im2col(x, geom);
    let np = geom.col_cols();
    let mut out_cm = vec![0.0; c_out * np];
    gemm(c_out, geom.col_rows(), np, w, false, &cols, false, &mut out_cm, 0.0);
    for (co, row) in out_cm.chunks_mut(np).enumerate() {
        row.iter_mut().for_each(|v| *v += b[co]);
    }
    cm_to_nchw(&out_cm, geom.batch, c_out, geom.out_h * geom.out_w)
}

pub(crate) fn conv2d_backward(x: &[f64], w: &[f64], grad_out: &[f64], c_out: usize, geom: &ConvGeom) -> ConvGrads {
    let np = geom.col_cols();
    let ckk = geom.col_rows();
    let g_cm = nchw_to_cm(grad_out, geom.batch, c_out, geom.out_h * geom.out_w);
    let cols = im2col(x, geom);

    let mut dw = vec![0.0; c_out * ckk];
    gemm(c_out, np, ckk, &g_cm, false, &cols, true, &mut dw, 0.0);
    let db = g_cm.chunks(np).map(|r| r.iter().sum()).collect();

    let mut dcols = vec![0.0; ckk * np];
    gemm(ckk, c_out, np, w, true, &g_cm, false, &mut dcols, 0.0);
    ConvGrads {
        input: col2im(&dcols, geom),
        weight: dw,
        bias: db,
    }
}

/// Forward transposed convolution. `geom` describes the *output* side as
/// seen by the adjoint convolution: `geom.channels` is `c_out`, and
/// `(geom.out_h, geom.out_w)` equals the input spatial size.
pub(crate) fn conv_transpose2d_forward(x: &[f64], w: &[f64], b: &[f64], c_in: usize, geom: &ConvGeom) -> Vec<f64> {
    let np = geom.col_cols();
    let ckk = geom.col_rows();
    let x_cm = nchw_to_cm(x, geom.batch, c_in, geom.out_h * geom.out_w);
    let mut cols = vec![0.0; ckk * np];
    gemm(ckk, c_in, np, w, true, &x_cm, false, &mut cols, 0.0);
    let mut out = col2im(&cols, geom);
    let plane = geom.height * geom.width;
    for (i, chunk) in out.chunks_mut(plane).enumerate() {
        let bias = b[i % geom.channels];
        chunk.iter_mut().for_each(|v| *v += bias);
    }
    out
}

pub(crate) fn conv_transpose2d_backward(x: &[f64], w: &[f64], grad_out: &[f64], c_in: usize, geom: &ConvGeom) -> ConvGrads {
    let np = geom.col_cols();
    let ckk = geom.col_rows();
    let plane_in = geom.out_h * geom.out_w;
    let gcols = im2col(grad_out, geom);
    let x_cm = nchw_to_cm(x, geom.batch, c_in, plane_in);

    let mut dx_cm = vec![0.0; c_in * np];
    gemm(c_in, ckk, np, w, false, &gcols, false, &mut dx_cm, 0.0);
    let mut dw = vec![0.0; c_in * ckk];
    gemm(c_in, np, ckk, &x_cm, false, &gcols, true, &mut dw, 0.0);

    let plane_out = geom.height * geom.width;
    let mut db = vec![0.0; geom.channels];
    for (i, chunk) in grad_out.chunks(plane_out).enumerate() {
        db[i % geom.channels] += chunk.iter().sum::<f64>();
    }
    ConvGrads {
        input: cm_to_nchw(&dx_cm, geom.batch, c_in, plane_in),
        weight: dw,
        bias: db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], w: &[f64], b: &[f64], c_out: usize, g: &ConvGeom) -> Vec<f64> {
        let mut out = vec![0.0; g.batch * c_out * g.out_h * g.out_w];
        for n in 0..g.batch {
            for co in 0..c_out {
                for oi in 0..g.out_h {
                    for oj in 0..g.out_w {
                        let mut acc = b[co];
                        for ci in 0..g.channels {
                            for ki in 0..g.kernel {
                                for kj in 0..g.kernel {
                                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                                    let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                                    if ii < 0 || jj < 0 || ii >= g.height as isize || jj >= g.width as isize {
                                        continue;
                                    }
                                    let xv = x[((n * g.channels + ci) * g.height + ii as usize) * g.width + jj as usize];
                                    let wv = w[((co * g.channels + ci) * g.kernel + ki) * g.kernel + kj];
                                    acc += xv * wv;
                                }
                            }
                        }
                        out[((n * c_out + co) * g.out_h + oi) * g.out_w + oj] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_conv_matches_direct_loop() {
        let g = ConvGeom {
            batch: 2,
            channels: 3,
            height: 6,
            width: 4,
            kernel: 3,
            stride: 2,
            pad: 1,
            out_h: conv_out_len(6, 3, 2, 1).unwrap(),
            out_w: conv_out_len(4, 3, 2, 1).unwrap(),
        };
        let x: Vec<f64> = (0..2 * 3 * 6 * 4).map(|i| ((i * 7 % 11) as f64) / 11.0 - 0.4).collect();
        let w: Vec<f64> = (0..5 * 3 * 9).map(|i| ((i * 5 % 13) as f64) / 13.0 - 0.5).collect();
        let b = vec![0.1, -0.2, 0.3, 0.0, 0.5];
        let fast = conv2d_forward(&x, &w, &b, 5, &g);
        let slow = naive_conv(&x, &w, &b, 5, &g);
        for (a, e) in fast.iter().zip(&slow) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeom {
            batch: 1,
            channels: 2,
            height: 5,
            width: 5,
            kernel: 3,
            stride: 2,
            pad: 1,
            out_h: 3,
            out_w: 3,
        };
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..g.col_rows() * g.col_cols()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = im2col(&x, &g).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, &g)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn stride_two_halves_even_dims() {
        assert_eq!(conv_out_len(32, 5, 2, 2), Some(16));
        assert_eq!(conv_out_len(16, 5, 1, 2), Some(16));
        assert_eq!(conv_transpose_out_len(16, 5, 2, 2, 1), Some(32));
        assert_eq!(conv_transpose_out_len(8, 5, 1, 2, 0), Some(8));
    }
}
