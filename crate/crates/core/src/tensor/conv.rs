use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weights `[out, in, kh, kw]`, bias `[out]`, plus the geometry of the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Result<Self> {
        weights.expect_rank("conv params", 4)?;
        let s = weights.shape();
        if s.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape {
                op: "conv params",
                detail: format!("all weight dims must be >= 1, got {s:?}"),
            });
        }
        bias.expect_shape("conv params (bias)", &[s[0]])?;
        if stride == 0 {
            return Err(Error::InvalidArgument("conv stride must be >= 1".into()));
        }
        Ok(ConvParams {
            weights,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }

    /// Row `o` of the weight matrix: the full `[in, kh, kw]` filter.
    pub fn filter(&self, o: usize) -> &[T] {
        self.weights.item(o)
    }
}

/// Output spatial size for one axis pair, or a shape error when the kernel
/// does not fit inside the padded input.
pub fn conv_output_hw(
    (h, w): (usize, usize),
    (kh, kw): (usize, usize),
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let ph = h + 2 * padding;
    let pw = w + 2 * padding;
    if ph < kh || pw < kw || stride == 0 {
        return Err(Error::InvalidShape {
            op: "conv2d",
            detail: format!(
                "kernel {kh}x{kw} does not fit input {h}x{w} with padding {padding}"
            ),
        });
    }
    Ok(((ph - kh) / stride + 1, (pw - kw) / stride + 1))
}

struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    fn out_shape(&self) -> [usize; 4] {
        [self.n, self.o, self.oh, self.ow]
    }
}

fn geometry<T: Scalar>(input_shape: &[usize], params: &ConvParams<T>) -> Result<Geometry> {
    let &[n, c, h, w] = input_shape else {
        return Err(Error::InvalidShape {
            op: "conv2d",
            detail: format!("expected rank-4 input, got shape {input_shape:?}"),
        });
    };
    if c != params.in_channels() {
        return Err(Error::ShapeMismatch {
            op: "conv2d (input channels)",
            expected: vec![params.in_channels()],
            actual: vec![c],
        });
    }
    let (kh, kw) = params.kernel();
    let (oh, ow) = conv_output_hw((h, w), (kh, kw), params.stride, params.padding)?;
    Ok(Geometry {
        n,
        c,
        h,
        w,
        o: params.out_channels(),
        kh,
        kw,
        oh,
        ow,
        stride: params.stride,
        pad: params.padding,
    })
}

/// Unfolds one image `[C,H,W]` into a `[C·kh·kw, oh·ow]` patch matrix.
fn im2col<T: Scalar>(image: &[T], g: &Geometry, col: &mut [T]) {
    let p = g.positions();
    for ci in 0..g.c {
        let plane = &image[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let out_row = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *slot = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters a patch matrix back, accumulating overlaps.
fn col2im<T: Scalar>(col: &[T], g: &Geometry, image: &mut [T]) {
    let p = g.positions();
    for ci in 0..g.c {
        let plane = &mut image[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &col[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation with bias (no kernel flip).
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    let g = geometry(input.shape(), params)?;
    let (k, p) = (g.patch(), g.positions());
    let mut out = Tensor::zeros(&g.out_shape());
    let mut col = vec![T::zero(); k * p];
    let weights = params.weights.data();
    let bias = params.bias.data();
    for n in 0..g.n {
        im2col(input.item(n), &g, &mut col);
        let dst = out.item_mut(n);
        for (o, chunk) in dst.chunks_exact_mut(p).enumerate() {
            chunk.fill(bias[o]);
        }
        T::gemm(
            g.o,
            k,
            p,
            T::one(),
            weights,
            (k as isize, 1),
            &col,
            (p as isize, 1),
            T::one(),
            dst,
            (p as isize, 1),
        );
    }
    Ok(out)
}

fn check_grad_out<T: Scalar>(g: &Geometry, grad_out: &Tensor<T>) -> Result<()> {
    grad_out.expect_shape("conv2d_backward (grad_out)", &g.out_shape())
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (gw, gb) = conv2d_backward_params(input, params, grad_out)?;
    let gi = conv2d_backward_input(input.shape(), params, grad_out)?;
    Ok((gi, gw, gb))
}

pub(crate) fn conv2d_backward_params<T: Scalar>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let g = geometry(input.shape(), params)?;
    check_grad_out(&g, grad_out)?;
    let (k, p) = (g.patch(), g.positions());
    let mut grad_w = Tensor::zeros(params.weights.shape());
    let mut grad_b = Tensor::zeros(&[g.o]);
    let mut col = vec![T::zero(); k * p];
    for n in 0..g.n {
        let go = grad_out.item(n);
        for (o, chunk) in go.chunks_exact(p).enumerate() {
            let s: T = chunk.iter().copied().sum();
            grad_b.data_mut()[o] = grad_b.data()[o] + s;
        }
        im2col(input.item(n), &g, &mut col);
        // grad_w[o, r] += Σ_p go[o, p] · col[r, p]
        T::gemm(
            g.o,
            p,
            k,
            T::one(),
            go,
            (p as isize, 1),
            &col,
            (1, p as isize),
            T::one(),
            grad_w.data_mut(),
            (k as isize, 1),
        );
    }
    Ok((grad_w, grad_b))
}

/// Input gradient only; the weight/bias reductions are skipped. Used by the
/// input-space ascent and the contribution analysis, which never need them.
pub fn conv2d_backward_input<T: Scalar>(
    input_shape: &[usize],
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = geometry(input_shape, params)?;
    check_grad_out(&g, grad_out)?;
    let (k, p) = (g.patch(), g.positions());
    let mut grad_in = Tensor::zeros(input_shape);
    let mut col = vec![T::zero(); k * p];
    for n in 0..g.n {
        // col[r, p] = Σ_o W[o, r] · go[o, p]
        T::gemm(
            k,
            g.o,
            p,
            T::one(),
            params.weights.data(),
            (1, k as isize),
            grad_out.item(n),
            (p as isize, 1),
            T::zero(),
            &mut col,
            (p as isize, 1),
        );
        col2im(&col, &g, grad_in.item_mut(n));
    }
    Ok(grad_in)
}
