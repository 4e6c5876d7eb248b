use crate::error::{shape, Result};

use super::conv::{conv1d_backward, conv1d_forward, Conv, ConvGeom, ConvGrad};
use super::real::Real;
use super::tensor::{relu_inplace, sigmoid, Tensor};

/// Confidence-aware convolution: a pose stream gated channel-wise by
/// `gamma + confidence`, and a confidence stream with its own convolution
/// and sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct CaConv<T> {
    pub pose: Conv<T>,
    pub conf: Conv<T>,
    pub gamma: T,
    /// Pose channels per confidence channel. 1 inside the network; 2 at the
    /// input, where a joint's x and y share its detector score.
    pub group: usize,
}

#[derive(Clone, Debug)]
pub struct CaCache<T> {
    pub s_in: Tensor<T>,
    pub c_in: Tensor<T>,
    pub gated: Tensor<T>,
    pub s_out: Tensor<T>,
    pub c_out: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct CaGrad<T> {
    pub pose: ConvGrad<T>,
    pub conf: ConvGrad<T>,
    pub ds_in: Tensor<T>,
    pub dc_in: Tensor<T>,
}

impl<T: Real> CaConv<T> {
    pub fn param_count(&self) -> usize {
        self.pose.param_count() + self.conf.param_count()
    }
}

/// `s_in[i] * (gamma + c_in[i / group])`.
pub fn gate<T: Real>(s_in: &Tensor<T>, c_in: &Tensor<T>, gamma: T, group: usize) -> Result<Tensor<T>> {
    let (ls, bs, ds) = s_in.seq_dims()?;
    let (lc, bc, dc) = c_in.seq_dims()?;
    if ls != lc || bs != bc || ds != dc * group {
        return Err(shape(format!(
            "pose stream {:?} and confidence stream {:?} do not match (group {group})",
            s_in.dims, c_in.dims
        )));
    }
    let mut out = s_in.clone();
    for (row, conf) in out.data.chunks_exact_mut(ds).zip(c_in.data.chunks_exact(dc)) {
        for (i, v) in row.iter_mut().enumerate() {
            *v *= gamma + conf[i / group];
        }
    }
    Ok(out)
}

pub fn ca_conv_forward<T: Real>(
    s_in: &Tensor<T>,
    c_in: &Tensor<T>,
    block: &CaConv<T>,
    geom: ConvGeom,
) -> Result<(Tensor<T>, Tensor<T>, CaCache<T>)> {
    let gated = gate(s_in, c_in, block.gamma, block.group)?;
    let mut s_out = conv1d_forward(&gated, &block.pose, geom)?;
    relu_inplace(&mut s_out);
    let mut c_out = conv1d_forward(c_in, &block.conf, geom)?;
    for v in &mut c_out.data {
        *v = sigmoid(*v);
    }
    let cache = CaCache {
        s_in: s_in.clone(),
        c_in: c_in.clone(),
        gated,
        s_out: s_out.clone(),
        c_out: c_out.clone(),
    };
    Ok((s_out, c_out, cache))
}

/// Backpropagates both streams. `dc_out` is `None` when nothing downstream
/// reads the confidence output; the gate path still feeds `dc_in`.
pub fn ca_conv_backward<T: Real>(
    cache: &CaCache<T>,
    block: &CaConv<T>,
    geom: ConvGeom,
    ds_out: &Tensor<T>,
    dc_out: Option<&Tensor<T>>,
) -> Result<CaGrad<T>> {
    if ds_out.dims != cache.s_out.dims {
        return Err(shape(format!("pose gradient {:?} does not match output {:?}", ds_out.dims, cache.s_out.dims)));
    }
    let mut dz = ds_out.clone();
    for (g, s) in dz.data.iter_mut().zip(&cache.s_out.data) {
        if *s <= T::zero() {
            *g = T::zero();
        }
    }
    let (pose, du) = conv1d_backward(&cache.gated, &block.pose, geom, &dz, true)?;
    let du = du.expect("input gradient requested");

    let (_, _, ds) = cache.s_in.seq_dims()?;
    let (_, _, dc) = cache.c_in.seq_dims()?;
    let mut ds_in = du.clone();
    let mut dc_in = Tensor::zeros(&cache.c_in.dims);
    let rows = ds_in.data.chunks_exact_mut(ds).zip(dc_in.data.chunks_exact_mut(dc));
    for (r, (ds_row, dc_row)) in rows.enumerate() {
        let s_row = &cache.s_in.data[r * ds..(r + 1) * ds];
        let c_row = &cache.c_in.data[r * dc..(r + 1) * dc];
        for i in 0..ds {
            let j = i / block.group;
            dc_row[j] += ds_row[i] * s_row[i];
            ds_row[i] *= block.gamma + c_row[j];
        }
    }

    let conf = match dc_out {
        Some(dc_out) => {
            if dc_out.dims != cache.c_out.dims {
                return Err(shape(format!(
                    "confidence gradient {:?} does not match output {:?}",
                    dc_out.dims, cache.c_out.dims
                )));
            }
            let mut dz = dc_out.clone();
            for (g, c) in dz.data.iter_mut().zip(&cache.c_out.data) {
                *g *= *c * (T::one() - *c);
            }
            let (conf, dcc) = conv1d_backward(&cache.c_in, &block.conf, geom, &dz, true)?;
            for (a, b) in dc_in.data.iter_mut().zip(&dcc.expect("input gradient requested").data) {
                *a += *b;
            }
            conf
        }
        None => block.conf.zero_grad(),
    };
    Ok(CaGrad { pose, conf, ds_in, dc_in })
}
