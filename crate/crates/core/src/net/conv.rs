use crate::error::{shape, Result};
use crate::rng::SeededRng;

use super::real::{gemm, Real, View};
use super::tensor::Tensor;

/// Tap spacing and output step of a 1D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub dilation: usize,
    pub stride: usize,
}

impl ConvGeom {
    pub const UNIT: Self = Self { dilation: 1, stride: 1 };

    pub fn dilated(dilation: usize) -> Self {
        Self { dilation, stride: 1 }
    }

    pub fn span(&self, kernel: usize) -> usize {
        self.dilation * (kernel - 1) + 1
    }

    pub fn output_len(&self, kernel: usize, len: usize) -> Result<usize> {
        let span = self.span(kernel);
        if len < span {
            return Err(shape(format!("sequence of length {len} is shorter than the receptive field {span}")));
        }
        Ok((len - span) / self.stride + 1)
    }
}

/// Weights `[kernel, d_in, d_out]` and bias `[d_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv<T> {
    pub fn zeros(kernel: usize, d_in: usize, d_out: usize) -> Self {
        Self { weight: Tensor::zeros(&[kernel, d_in, d_out]), bias: Tensor::zeros(&[d_out]) }
    }

    /// He-uniform weights, `U(-b, b)` with `b = sqrt(6 / fan_in)`, and constant bias.
    pub fn he_uniform(kernel: usize, d_in: usize, d_out: usize, bias: f64, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / (kernel * d_in) as f64).sqrt();
        let mut conv = Self::zeros(kernel, d_in, d_out);
        for w in &mut conv.weight.data {
            *w = T::of(rng.uniform_range(-bound, bound));
        }
        conv.bias.data.fill(T::of(bias));
        conv
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims[0]
    }

    pub fn d_in(&self) -> usize {
        self.weight.dims[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.dims[2]
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn zero_grad(&self) -> ConvGrad<T> {
        ConvGrad { weight: Tensor::zeros(&self.weight.dims), bias: Tensor::zeros(&self.bias.dims) }
    }
}

/// Runs `f(rows, x_offset, out_offset)` over the GEMM blocks of tap `k`.
fn for_each_block(
    geom: ConvGeom,
    k: usize,
    l_out: usize,
    batch: usize,
    d_in: usize,
    d_out: usize,
    mut f: impl FnMut(usize, usize, usize),
) {
    if geom.stride == 1 {
        f(l_out * batch, k * geom.dilation * batch * d_in, 0);
    } else {
        for t in 0..l_out {
            f(batch, (t * geom.stride + k * geom.dilation) * batch * d_in, t * batch * d_out);
        }
    }
}

/// Valid (unpadded) dilated cross-correlation over time.
pub fn conv1d_forward<T: Real>(x: &Tensor<T>, conv: &Conv<T>, geom: ConvGeom) -> Result<Tensor<T>> {
    let (len, batch, d_in) = x.seq_dims()?;
    if d_in != conv.d_in() {
        return Err(shape(format!("convolution expects {} input channels, got {d_in}", conv.d_in())));
    }
    let (kernel, d_out) = (conv.kernel(), conv.d_out());
    let l_out = geom.output_len(kernel, len)?;
    let mut out = x.seq_like(l_out, d_out);
    for row in out.data.chunks_exact_mut(d_out) {
        row.copy_from_slice(&conv.bias.data);
    }
    for k in 0..kernel {
        for_each_block(geom, k, l_out, batch, d_in, d_out, |rows, xo, oo| {
            gemm(
                rows,
                d_in,
                d_out,
                &x.data,
                View::rows(xo, d_in),
                &conv.weight.data,
                View::rows(k * d_in * d_out, d_out),
                T::one(),
                &mut out.data,
                View::rows(oo, d_out),
            )
        });
    }
    Ok(out)
}

/// Gradients of `conv1d_forward` given the upstream gradient `dout`.
pub fn conv1d_backward<T: Real>(
    x: &Tensor<T>,
    conv: &Conv<T>,
    geom: ConvGeom,
    dout: &Tensor<T>,
    need_dx: bool,
) -> Result<(ConvGrad<T>, Option<Tensor<T>>)> {
    let (len, batch, d_in) = x.seq_dims()?;
    let (kernel, d_out) = (conv.kernel(), conv.d_out());
    let l_out = geom.output_len(kernel, len)?;
    if dout.len() != l_out * batch * d_out {
        return Err(shape(format!("upstream gradient has {} values, expected {}", dout.len(), l_out * batch * d_out)));
    }
    let mut grad = conv.zero_grad();
    for row in dout.data.chunks_exact(d_out) {
        for (g, v) in grad.bias.data.iter_mut().zip(row) {
            *g += *v;
        }
    }
    let mut dx = need_dx.then(|| Tensor::zeros(&x.dims));
    for k in 0..kernel {
        let w_off = k * d_in * d_out;
        for_each_block(geom, k, l_out, batch, d_in, d_out, |rows, xo, oo| {
            gemm(
                d_in,
                rows,
                d_out,
                &x.data,
                View::transposed(xo, d_in),
                &dout.data,
                View::rows(oo, d_out),
                T::one(),
                &mut grad.weight.data,
                View::rows(w_off, d_out),
            );
            if let Some(dx) = dx.as_mut() {
                gemm(
                    rows,
                    d_out,
                    d_in,
                    &dout.data,
                    View::rows(oo, d_out),
                    &conv.weight.data,
                    View::transposed(w_off, d_out),
                    T::one(),
                    &mut dx.data,
                    View::rows(xo, d_in),
                );
            }
        });
    }
    Ok((grad, dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &Tensor<f64>, conv: &Conv<f64>, geom: ConvGeom) -> Tensor<f64> {
        let (len, batch, d_in) = x.seq_dims().unwrap();
        let (kernel, d_out) = (conv.kernel(), conv.d_out());
        let l_out = geom.output_len(kernel, len).unwrap();
        let mut out = Tensor::zeros(&[l_out, batch, d_out]);
        for t in 0..l_out {
            for b in 0..batch {
                for o in 0..d_out {
                    let mut acc = conv.bias.data[o];
                    for k in 0..kernel {
                        let s = t * geom.stride + k * geom.dilation;
                        for i in 0..d_in {
                            acc += x.data[(s * batch + b) * d_in + i] * conv.weight.data[(k * d_in + i) * d_out + o];
                        }
                    }
                    out.data[(t * batch + b) * d_out + o] = acc;
                }
            }
        }
        out
    }

    fn random(dims: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
        let n = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut conv = Conv::<f64>::zeros(1, 3, 3);
        for i in 0..3 {
            conv.weight.data[i * 3 + i] = 1.0;
        }
        let x = random(&[6, 3], &mut SeededRng::new(1, 0));
        assert_eq!(conv1d_forward(&x, &conv, ConvGeom::UNIT).unwrap(), x);
    }

    #[test]
    fn sliding_sum() {
        let conv = Conv { weight: Tensor::filled(&[3, 1, 1], 1.0), bias: Tensor::zeros(&[1]) };
        let x = Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(conv1d_forward(&x, &conv, ConvGeom::UNIT).unwrap().data, vec![6.0, 9.0]);
    }

    #[test]
    fn dilated_shape() {
        let conv = Conv::<f32>::zeros(3, 2, 2);
        let x = Tensor::zeros(&[9, 2]);
        assert_eq!(conv1d_forward(&x, &conv, ConvGeom::dilated(3)).unwrap().dims, vec![3, 2]);
        assert!(conv1d_forward(&Tensor::zeros(&[6, 2]), &conv, ConvGeom::dilated(3)).is_err());
    }

    #[test]
    fn matches_naive_for_all_geometries() {
        let mut rng = SeededRng::new(2, 0);
        for geom in [ConvGeom::UNIT, ConvGeom::dilated(2), ConvGeom { dilation: 1, stride: 3 }, ConvGeom { dilation: 2, stride: 2 }] {
            let conv = Conv::he_uniform(3, 4, 5, 0.3, &mut rng);
            let x = random(&[13, 3, 4], &mut rng);
            let fast = conv1d_forward(&x, &conv, geom).unwrap();
            assert!(fast.max_abs_diff(&naive(&x, &conv, geom)) < 1e-12, "{geom:?}");
        }
    }

    #[test]
    fn backward_matches_adjoint() {
        // <dout, conv(x)> is bilinear, so its derivatives are exact finite differences
        // for a unit step in any input or weight.
        let mut rng = SeededRng::new(3, 0);
        for geom in [ConvGeom::dilated(2), ConvGeom { dilation: 1, stride: 3 }] {
            let conv = Conv::he_uniform(3, 2, 3, 0.0, &mut rng);
            let x = random(&[9, 2, 2], &mut rng);
            let out = conv1d_forward(&x, &conv, geom).unwrap();
            let dout = random(&out.dims, &mut rng);
            let f = |x: &Tensor<f64>, c: &Conv<f64>| -> f64 {
                let o = conv1d_forward(x, c, geom).unwrap();
                o.data.iter().zip(&dout.data).map(|(a, b)| a * b).sum()
            };
            let (g, dx) = conv1d_backward(&x, &conv, geom, &dout, true).unwrap();
            let dx = dx.unwrap();
            let base = f(&x, &conv);
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp.data[i] += 1.0;
                assert!((f(&xp, &conv) - base - dx.data[i]).abs() < 1e-9);
            }
            for i in 0..conv.weight.len() {
                let mut cp = conv.clone();
                cp.weight.data[i] += 1.0;
                assert!((f(&x, &cp) - base - g.weight.data[i]).abs() < 1e-9);
            }
            for i in 0..conv.bias.len() {
                let mut cp = conv.clone();
                cp.bias.data[i] += 1.0;
                assert!((f(&x, &cp) - base - g.bias.data[i]).abs() < 1e-9);
            }
        }
    }
}
