//! Convolution and transposed convolution over NCHW tensors.
//!
//! Both directions reduce to one gemm plus a gather/scatter between the
//! tensor and a `(C*k*k, N*grid_h*grid_w)` column matrix. The grid is the
//! spatial loop of the kernel application: a convolution gathers input
//! patches over its *output* grid, a transposed convolution scatters
//! kernel-weighted columns over its *input* grid. Sharing the two index
//! maps keeps the four backward passes honest.

use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, Array4, Axis};

use super::matmul::par_matmul;
use crate::num::Real;

#[derive(Debug, Clone, Copy)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_size(&self, input: usize) -> usize {
        (input + 2 * self.pad - self.kernel) / self.stride + 1
    }
    pub fn transposed_out_size(&self, input: usize) -> usize {
        (input - 1) * self.stride + self.kernel - 2 * self.pad
    }
}

/// col[(c*k+ky)*k+kx, n*GH*GW + gh*GW + gw] = x[n, c, gh*s+ky-p, gw*s+kx-p],
/// zero where the index falls outside `x`.
pub(crate) fn gather_cols<T: Real>(
    x: &Array4<T>,
    geom: ConvGeom,
    grid: (usize, usize),
) -> Array2<T> {
    let (n, c, h, w) = x.dim();
    let (gh, gw) = grid;
    let k = geom.kernel;
    let mut col = Array2::<T>::zeros((c * k * k, n * gh * gw));
    let xs = x.as_slice().expect("contiguous input");
    col.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut out_row)| {
            let kx = row % k;
            let ky = (row / k) % k;
            let ci = row / (k * k);
            let or = out_row.as_slice_mut().expect("contiguous row");
            for ni in 0..n {
                let x_base = (ni * c + ci) * h * w;
                let o_base = ni * gh * gw;
                for g_y in 0..gh {
                    let iy = (g_y * geom.stride + ky) as isize - geom.pad as isize;
                    let dst = &mut or[o_base + g_y * gw..o_base + (g_y + 1) * gw];
                    if iy < 0 || iy as usize >= h {
                        // zeros already present
                        continue;
                    }
                    let src_row = &xs[x_base + iy as usize * w..x_base + (iy as usize + 1) * w];
                    for g_x in 0..gw {
                        let ix = (g_x * geom.stride + kx) as isize - geom.pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst[g_x] = src_row[ix as usize];
                        }
                    }
                }
            }
        });
    col
}

/// Adjoint of [`gather_cols`]: accumulates column entries back into a
/// `(n, c, h, w)` tensor. Parallel over samples; each sample's region is
/// disjoint so the accumulation order is fixed.
pub(crate) fn scatter_cols_add<T: Real>(
    col: &Array2<T>,
    geom: ConvGeom,
    grid: (usize, usize),
    target: &mut Array4<T>,
) {
    let (n, c, h, w) = target.dim();
    let (gh, gw) = grid;
    let k = geom.kernel;
    debug_assert_eq!(col.dim(), (c * k * k, n * gh * gw));
    let cs = col.as_slice().expect("contiguous col");
    let ncols = n * gh * gw;
    target
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(ni, mut t)| {
            let ts = t.as_slice_mut().expect("contiguous sample");
            for row in 0..c * k * k {
                let kx = row % k;
                let ky = (row / k) % k;
                let ci = row / (k * k);
                let row_base = row * ncols + ni * gh * gw;
                for g_y in 0..gh {
                    let iy = (g_y * geom.stride + ky) as isize - geom.pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let t_base = ci * h * w + iy as usize * w;
                    let src = &cs[row_base + g_y * gw..row_base + (g_y + 1) * gw];
                    for g_x in 0..gw {
                        let ix = (g_x * geom.stride + kx) as isize - geom.pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            ts[t_base + ix as usize] += src[g_x];
                        }
                    }
                }
            }
        });
}

/// NCHW -> (C, N*H*W) channel-major matrix (copy).
pub(crate) fn nchw_to_cmat<T: Real>(x: &Array4<T>) -> Array2<T> {
    let (n, c, h, w) = x.dim();
    let xs = x.as_slice().expect("contiguous input");
    let mut m = Array2::<T>::zeros((c, n * h * w));
    let ms = m.as_slice_mut().unwrap();
    let hw = h * w;
    for ci in 0..c {
        for ni in 0..n {
            let src = &xs[(ni * c + ci) * hw..(ni * c + ci + 1) * hw];
            ms[ci * n * hw + ni * hw..ci * n * hw + (ni + 1) * hw].copy_from_slice(src);
        }
    }
    m
}

/// (C, N*H*W) -> NCHW (copy).
pub(crate) fn cmat_to_nchw<T: Real>(m: &Array2<T>, n: usize, h: usize, w: usize) -> Array4<T> {
    let c = m.nrows();
    let ms = m.as_slice().expect("contiguous matrix");
    let mut x = Array4::<T>::zeros((n, c, h, w));
    let xs = x.as_slice_mut().unwrap();
    let hw = h * w;
    for ci in 0..c {
        for ni in 0..n {
            let src = &ms[ci * n * hw + ni * hw..ci * n * hw + (ni + 1) * hw];
            xs[(ni * c + ci) * hw..(ni * c + ci + 1) * hw].copy_from_slice(src);
        }
    }
    x
}

fn add_channel_bias<T: Real>(out: &mut Array4<T>, bias: &Array1<T>) {
    let (n, c, h, w) = out.dim();
    let os = out.as_slice_mut().unwrap();
    let hw = h * w;
    for ni in 0..n {
        for ci in 0..c {
            let b = bias[ci];
            for v in &mut os[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                *v += b;
            }
        }
    }
}

fn channel_bias_grad<T: Real>(gout: &Array4<T>) -> Array1<T> {
    let (n, c, h, w) = gout.dim();
    let gs = gout.as_slice().unwrap();
    let hw = h * w;
    let mut db = Array1::<T>::zeros(c);
    for ni in 0..n {
        for ci in 0..c {
            let mut acc = T::zero();
            for &g in &gs[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                acc += g;
            }
            db[ci] += acc;
        }
    }
    db
}

/// Standard convolution; weight layout `(c_out, c_in, k, k)`.
#[derive(Debug, Clone)]
pub struct Conv2d<T: Real> {
    pub weight: Array4<T>,
    pub bias: Array1<T>,
    pub geom: ConvGeom,
}

#[derive(Debug, Clone)]
pub struct ConvGrad<T: Real> {
    pub weight: Array4<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(weight: Array4<T>, bias: Array1<T>, stride: usize, pad: usize) -> Self {
        let kernel = weight.dim().2;
        assert_eq!(weight.dim().2, weight.dim().3, "square kernels only");
        Self {
            weight,
            bias,
            geom: ConvGeom { kernel, stride, pad },
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn forward(&self, x: &Array4<T>) -> Array4<T> {
        let (n, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_channels());
        let (oh, ow) = (self.geom.out_size(h), self.geom.out_size(w));
        let col = gather_cols(x, self.geom, (oh, ow));
        let c_out = self.out_channels();
        let w_mat = self
            .weight
            .view()
            .into_shape_with_order((c_out, c * self.geom.kernel * self.geom.kernel))
            .expect("contiguous weight");
        let out_mat = par_matmul(w_mat, col.view());
        let mut out = cmat_to_nchw(&out_mat, n, oh, ow);
        add_channel_bias(&mut out, &self.bias);
        out
    }

    /// Returns `(dx, grads)`. `dx` is skipped when `input_grad` is false
    /// (first layer); grads are skipped when `param_grads` is false
    /// (pass-through backprop, e.g. discriminator during a generator step).
    pub fn backward(
        &self,
        x: &Array4<T>,
        gout: &Array4<T>,
        input_grad: bool,
        param_grads: bool,
    ) -> (Option<Array4<T>>, Option<ConvGrad<T>>) {
        let (n, c, h, w) = x.dim();
        let (_, c_out, oh, ow) = gout.dim();
        let kk = self.geom.kernel * self.geom.kernel;
        let gout_mat = nchw_to_cmat(gout);
        let w_mat = self
            .weight
            .view()
            .into_shape_with_order((c_out, c * kk))
            .expect("contiguous weight");

        let grads = param_grads.then(|| {
            let col = gather_cols(x, self.geom, (oh, ow));
            let dw_mat = par_matmul(gout_mat.view(), col.t());
            ConvGrad {
                weight: dw_mat
                    .into_shape_with_order((c_out, c, self.geom.kernel, self.geom.kernel))
                    .expect("weight grad shape"),
                bias: channel_bias_grad(gout),
            }
        });

        let dx = input_grad.then(|| {
            let dcol = par_matmul(w_mat.t(), gout_mat.view());
            let mut dx = Array4::<T>::zeros((n, c, h, w));
            scatter_cols_add(&dcol, self.geom, (oh, ow), &mut dx);
            dx
        });

        (dx, grads)
    }
}

/// Transposed convolution; weight layout `(c_in, c_out, k, k)`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T: Real> {
    pub weight: Array4<T>,
    pub bias: Array1<T>,
    pub geom: ConvGeom,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn new(weight: Array4<T>, bias: Array1<T>, stride: usize, pad: usize) -> Self {
        let kernel = weight.dim().2;
        assert_eq!(weight.dim().2, weight.dim().3, "square kernels only");
        Self {
            weight,
            bias,
            geom: ConvGeom { kernel, stride, pad },
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            self.geom.transposed_out_size(h),
            self.geom.transposed_out_size(w),
        )
    }

    fn w_mat(&self) -> ndarray::ArrayView2<'_, T> {
        let (c_in, c_out, k, _) = self.weight.dim();
        self.weight
            .view()
            .into_shape_with_order((c_in, c_out * k * k))
            .expect("contiguous weight")
    }

    pub fn forward(&self, x: &Array4<T>) -> Array4<T> {
        let (n, c_in, h, w) = x.dim();
        debug_assert_eq!(c_in, self.in_channels());
        let (oh, ow) = self.out_hw(h, w);
        let x_mat = nchw_to_cmat(x);
        let cols = par_matmul(self.w_mat().t(), x_mat.view());
        let mut out = Array4::<T>::zeros((n, self.out_channels(), oh, ow));
        scatter_cols_add(&cols, self.geom, (h, w), &mut out);
        add_channel_bias(&mut out, &self.bias);
        out
    }

    pub fn backward(
        &self,
        x: &Array4<T>,
        gout: &Array4<T>,
        input_grad: bool,
        param_grads: bool,
    ) -> (Option<Array4<T>>, Option<ConvGrad<T>>) {
        let (n, _c_in, h, w) = x.dim();
        let gcols = gather_cols(gout, self.geom, (h, w));

        let grads = param_grads.then(|| {
            let x_mat = nchw_to_cmat(x);
            let dw_mat = par_matmul(x_mat.view(), gcols.t());
            let (c_in, c_out, k, _) = self.weight.dim();
            ConvGrad {
                weight: dw_mat
                    .into_shape_with_order((c_in, c_out, k, k))
                    .expect("weight grad shape"),
                bias: channel_bias_grad(gout),
            }
        });

        let dx = input_grad.then(|| {
            let dx_mat = par_matmul(self.w_mat(), gcols.view());
            cmat_to_nchw(&dx_mat, n, h, w)
        });

        (dx, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn conv_matches_hand_computation() {
        // 1 sample, 1 channel, 3x3 input, 2x2 kernel, stride 1, no pad.
        let x = array![[[[1.0f64, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]]];
        let w = array![[[[1.0f64, 0.0], [0.0, -1.0]]]];
        let conv = Conv2d::new(w, array![0.5], 1, 0);
        let y = conv.forward(&x);
        // y[i,j] = x[i,j] - x[i+1,j+1] + 0.5
        assert_eq!(y, array![[[[-3.5f64, -3.5], [-3.5, -3.5]]]]);
    }

    #[test]
    fn conv_stride_and_pad() {
        let x = array![[[[1.0f64, 2.0], [3.0, 4.0]]]];
        let w = array![[[[1.0f64]]]]; // identity 1x1
        let conv = Conv2d::new(w, array![0.0], 2, 1);
        // padded to 4x4 with zero ring, stride 2 over 1x1 kernel -> corners of pad
        let y = conv.forward(&x);
        assert_eq!(y.dim(), (1, 1, 2, 2));
        assert_eq!(y, array![[[[0.0, 0.0], [0.0, 4.0]]]]);
    }

    #[test]
    fn transposed_conv_upsamples() {
        // 1x1 input through a 4x4 kernel, stride 2, pad 1 -> 2x2 output window
        let x = array![[[[2.0f64]]]];
        let mut w = Array4::<f64>::zeros((1, 1, 4, 4));
        for ky in 0..4 {
            for kx in 0..4 {
                w[[0, 0, ky, kx]] = (ky * 4 + kx) as f64;
            }
        }
        let convt = ConvTranspose2d::new(w, Array1::zeros(1), 2, 1);
        let y = convt.forward(&x);
        // out size (1-1)*2 + 4 - 2 = 2; visible kernel window is [1..3, 1..3]
        assert_eq!(y, array![[[[2.0 * 5.0, 2.0 * 6.0], [2.0 * 9.0, 2.0 * 10.0]]]]);
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> when they share one weight tensor:
        // the (3, 2, 4, 4) array reads as (c_out, c_in) for the conv and as
        // (c_in, c_out) for the transposed conv. k=4, s=2, p=1 doubles and
        // halves exactly, so the shapes pair up without output padding.
        let mut w = Array4::<f64>::zeros((3, 2, 4, 4));
        for (i, v) in w.iter_mut().enumerate() {
            *v = ((i * 7 + 3) % 11) as f64 * 0.1 - 0.5;
        }
        let conv = Conv2d::new(w.clone(), Array1::zeros(3), 2, 1);
        let convt = ConvTranspose2d::new(w, Array1::zeros(2), 2, 1);

        let x = Array4::from_shape_fn((2, 2, 8, 8), |(a, b, c, d)| {
            ((a * 13 + b * 5 + c * 3 + d) % 17) as f64 * 0.2 - 1.0
        });
        let fx = conv.forward(&x); // (2,3,4,4)
        let y = Array4::from_shape_fn(fx.dim(), |(a, b, c, d)| {
            ((a + b * 7 + c + d * 2) % 5) as f64 - 2.0
        });
        let bty = convt.forward(&y); // (2,2,8,8)

        let lhs: f64 = fx.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(bty.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "lhs={lhs} rhs={rhs}");
    }
}
