use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Error, Result};
use crate::pose::{ConfidenceSequence, PoseSequence2D, PoseSequence3D};
use crate::rng::SeededRng;
use crate::skeleton::SkeletonLayout;

use super::caconv::{ca_conv_backward, ca_conv_forward, CaCache, CaConv};
use super::conv::{conv1d_backward, conv1d_forward, Conv, ConvGeom, ConvGrad};
use super::real::Real;
use super::tensor::{concat_channels, relu_inplace, Tensor};

/// Initial pre-sigmoid bias of every confidence-path convolution.
pub const CONF_BIAS_INIT: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    #[default]
    PoseOnly,
    ConfConcat,
    ConfidenceAware,
}

impl InputMode {
    pub const ALL: [InputMode; 3] = [InputMode::PoseOnly, InputMode::ConfConcat, InputMode::ConfidenceAware];

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::PoseOnly => "pose_only",
            InputMode::ConfConcat => "conf_concat",
            InputMode::ConfidenceAware => "confidence_aware",
        }
    }

    pub fn uses_confidence(self) -> bool {
        self != InputMode::PoseOnly
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| validation(format!("unknown input mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifterConfig {
    pub input_mode: InputMode,
    pub num_blocks: usize,
    pub kernel: usize,
    pub channels: usize,
    pub dropout_rate: f64,
    pub gamma: f64,
}

impl Default for LifterConfig {
    fn default() -> Self {
        Self {
            input_mode: InputMode::PoseOnly,
            num_blocks: 3,
            kernel: 3,
            channels: 128,
            dropout_rate: 0.25,
            gamma: 1.0,
        }
    }
}

impl LifterConfig {
    /// Smallest configuration with the given receptive field: kernel-3 blocks
    /// for powers of three, three kernel-1 blocks for a single frame.
    pub fn with_receptive_field(rf: usize) -> Result<Self> {
        if rf == 1 {
            return Ok(Self { kernel: 1, num_blocks: 3, ..Default::default() });
        }
        let mut m = 0;
        let mut r = 1;
        while r < rf {
            r *= 3;
            m += 1;
        }
        if r != rf {
            return Err(validation(format!("receptive field {rf} is not a power of 3")));
        }
        Ok(Self { num_blocks: m, ..Default::default() })
    }

    pub fn receptive_field(&self) -> usize {
        self.kernel.pow(self.num_blocks as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(validation(format!("lifter.kernel must be odd, got {}", self.kernel)));
        }
        if self.channels == 0 {
            return Err(validation("lifter.channels must be positive"));
        }
        if self.kernel > 1 && self.num_blocks > 8 {
            return Err(validation("lifter.num_blocks above 8 gives an impractical receptive field"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(validation("lifter.dropout_rate must lie in [0, 1)"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(validation("lifter.gamma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Plain(Conv<T>),
    Ca(CaConv<T>),
}

impl<T: Real> Layer<T> {
    fn tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Plain(c) => vec![("weight", &c.weight), ("bias", &c.bias)],
            Layer::Ca(b) => vec![
                ("pose.weight", &b.pose.weight),
                ("pose.bias", &b.pose.bias),
                ("conf.weight", &b.conf.weight),
                ("conf.bias", &b.conf.bias),
            ],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Plain(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Ca(b) => vec![&mut b.pose.weight, &mut b.pose.bias, &mut b.conf.weight, &mut b.conf.bias],
        }
    }
}

/// How blocks walk the time axis. `Dense` evaluates every output frame with
/// dilations `kernel^i`; `Strided` evaluates only the centre frame of a
/// window of exactly one receptive field, using stride `kernel` instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Dense,
    Strided,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Padding {
    /// Repeat the first and last frames.
    #[default]
    Edge,
}

#[derive(Clone, Debug)]
enum LayerCache<T> {
    Plain { x: Tensor<T>, out: Tensor<T> },
    Ca(CaCache<T>),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    geometry: Geometry,
    layers: Vec<LayerCache<T>>,
    masks: Vec<Option<Tensor<T>>>,
    features: Tensor<T>,
}

/// Temporal convolutional lifter: input projection, `num_blocks` dilated
/// blocks, and a linear head predicting root-relative 3D joints in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct LifterModel<T> {
    pub config: LifterConfig,
    pub joints: usize,
    pub input: Layer<T>,
    pub blocks: Vec<Layer<T>>,
    pub head: Conv<T>,
}

pub fn build_model<T: Real>(config: &LifterConfig, layout: &SkeletonLayout, rng: &SeededRng) -> Result<LifterModel<T>> {
    layout.validate()?;
    build_for_joints(config, layout.joint_count, rng)
}

/// `γ + sigmoid(CONF_BIAS_INIT)`, the typical gate value of a fresh model.
pub fn gate_gain_at_init(gamma: f64) -> f64 {
    gamma + 1.0 / (1.0 + (-CONF_BIAS_INIT).exp())
}

pub(crate) fn build_for_joints<T: Real>(config: &LifterConfig, j: usize, rng: &SeededRng) -> Result<LifterModel<T>> {
    config.validate()?;
    if j == 0 {
        return Err(validation("a lifter needs at least one joint"));
    }
    let d = config.channels;
    let k = config.kernel;
    let gamma = T::of(config.gamma);
    // Pose-path weights draw from the same streams in every mode.
    let he = |label: &str, kernel, d_in, d_out, bias| Conv::he_uniform(kernel, d_in, d_out, bias, &mut rng.child(label));
    // Gated pose weights are divided by the gate's value at init so each
    // layer starts with the plain stack's activation scale.
    let gated = |label: &str, kernel, d_in| {
        let mut conv = he(label, kernel, d_in, d, 0.0);
        let gain = T::of(gate_gain_at_init(config.gamma));
        conv.weight.data.iter_mut().for_each(|w| *w /= gain);
        conv
    };
    let input = match config.input_mode {
        InputMode::PoseOnly => Layer::Plain(he("input", 1, 2 * j, d, 0.0)),
        InputMode::ConfConcat => Layer::Plain(he("input", 1, 3 * j, d, 0.0)),
        InputMode::ConfidenceAware => Layer::Ca(CaConv {
            pose: gated("input", 1, 2 * j),
            conf: he("input.conf", 1, j, d, CONF_BIAS_INIT),
            gamma,
            group: 2,
        }),
    };
    let blocks = (0..config.num_blocks)
        .map(|i| {
            let label = format!("block{i}");
            match config.input_mode {
                InputMode::ConfidenceAware => Layer::Ca(CaConv {
                    pose: gated(&label, k, d),
                    conf: he(&format!("{label}.conf"), k, d, d, CONF_BIAS_INIT),
                    gamma,
                    group: 1,
                }),
                _ => Layer::Plain(he(&label, k, d, d, 0.0)),
            }
        })
        .collect();
    let head = he("head", 1, d, 3 * j, 0.0);
    Ok(LifterModel { config: config.clone(), joints: j, input, blocks, head })
}

impl<T: Real> Trace<T> {
    /// Which ReLU units fired, layer by layer.
    pub fn active_units(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                LayerCache::Plain { out, .. } => &out.data,
                LayerCache::Ca(c) => &c.s_out.data,
            })
            .map(|v| *v > T::zero())
            .collect()
    }
}

impl<T: Real> LifterModel<T> {
    pub fn receptive_field(&self) -> usize {
        self.config.receptive_field()
    }

    /// Named parameters in a fixed order shared by gradients, Adam state and checkpoints.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut groups = vec![("input".to_string(), self.input.tensors())];
        for (i, b) in self.blocks.iter().enumerate() {
            groups.push((format!("block{i}"), b.tensors()));
        }
        groups.push(("head".to_string(), vec![("weight", &self.head.weight), ("bias", &self.head.bias)]));
        groups
            .into_iter()
            .flat_map(|(prefix, ts)| ts.into_iter().map(move |(n, t)| (format!("{prefix}.{n}"), t)))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.input.tensors_mut();
        for b in &mut self.blocks {
            out.extend(b.tensors_mut());
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> LifterModel<U> {
        let conv = |c: &Conv<T>| Conv { weight: c.weight.cast(), bias: c.bias.cast() };
        let layer = |l: &Layer<T>| match l {
            Layer::Plain(c) => Layer::Plain(conv(c)),
            Layer::Ca(b) => Layer::Ca(CaConv {
                pose: conv(&b.pose),
                conf: conv(&b.conf),
                gamma: U::of(b.gamma.as_f64()),
                group: b.group,
            }),
        };
        LifterModel {
            config: self.config.clone(),
            joints: self.joints,
            input: layer(&self.input),
            blocks: self.blocks.iter().map(layer).collect(),
            head: conv(&self.head),
        }
    }

    fn block_geom(&self, i: usize, geometry: Geometry) -> ConvGeom {
        let k = self.config.kernel;
        match geometry {
            Geometry::Dense => ConvGeom::dilated(k.pow(i as u32)),
            Geometry::Strided => ConvGeom { dilation: 1, stride: k },
        }
    }

    /// Forward pass over time-major inputs `pose: [L, B, 2J]` and
    /// `conf: [L, B, J]`. Dropout is active only when `dropout` is given.
    pub fn forward(
        &self,
        pose: &Tensor<T>,
        conf: Option<&Tensor<T>>,
        geometry: Geometry,
        mut dropout: Option<&mut SeededRng>,
    ) -> Result<(Tensor<T>, Trace<T>)> {
        let (len, batch, d_pose) = pose.seq_dims()?;
        if d_pose != 2 * self.joints {
            return Err(shape(format!("model expects {} pose channels, got {d_pose}", 2 * self.joints)));
        }
        let conf = match (self.config.input_mode.uses_confidence(), conf) {
            (false, _) => None,
            (true, None) => return Err(validation(format!("{} input requires confidences", self.config.input_mode))),
            (true, Some(c)) => {
                if c.seq_dims()? != (len, batch, self.joints) {
                    return Err(shape(format!("confidence tensor {:?} does not match pose {:?}", c.dims, pose.dims)));
                }
                Some(c)
            }
        };
        if geometry == Geometry::Strided && len != self.receptive_field() {
            return Err(shape(format!(
                "strided evaluation needs windows of exactly {} frames, got {len}",
                self.receptive_field()
            )));
        }
        let rate = self.config.dropout_rate;
        let mut apply_dropout = |s: &mut Tensor<T>| -> Option<Tensor<T>> {
            let rng = dropout.as_deref_mut().filter(|_| rate > 0.0)?;
            let keep = T::of(1.0 / (1.0 - rate));
            let mask: Vec<T> = (0..s.len()).map(|_| if rng.uniform() < rate { T::zero() } else { keep }).collect();
            for (v, m) in s.data.iter_mut().zip(&mask) {
                *v *= *m;
            }
            Some(Tensor { dims: s.dims.clone(), data: mask })
        };

        let mut layers = Vec::with_capacity(self.blocks.len() + 1);
        let mut masks = Vec::with_capacity(self.blocks.len() + 1);
        let (mut s, mut c) = match &self.input {
            Layer::Plain(conv) => {
                let x = match conf {
                    Some(conf) => concat_channels(pose, conf)?,
                    None => pose.clone(),
                };
                let mut out = conv1d_forward(&x, conv, ConvGeom::UNIT)?;
                relu_inplace(&mut out);
                layers.push(LayerCache::Plain { x, out: out.clone() });
                (out, None)
            }
            Layer::Ca(block) => {
                let conf = conf.expect("confidence checked above");
                let (s, c, cache) = ca_conv_forward(pose, conf, block, ConvGeom::UNIT)?;
                layers.push(LayerCache::Ca(cache));
                (s, Some(c))
            }
        };
        masks.push(apply_dropout(&mut s));
        for (i, layer) in self.blocks.iter().enumerate() {
            let geom = self.block_geom(i, geometry);
            match layer {
                Layer::Plain(conv) => {
                    let mut out = conv1d_forward(&s, conv, geom)?;
                    relu_inplace(&mut out);
                    layers.push(LayerCache::Plain { x: s, out: out.clone() });
                    s = out;
                }
                Layer::Ca(block) => {
                    let c_in = c.take().ok_or_else(|| shape("confidence stream missing"))?;
                    let (s_out, c_out, cache) = ca_conv_forward(&s, &c_in, block, geom)?;
                    layers.push(LayerCache::Ca(cache));
                    s = s_out;
                    c = Some(c_out);
                }
            }
            masks.push(apply_dropout(&mut s));
        }
        let out = conv1d_forward(&s, &self.head, ConvGeom::UNIT)?;
        Ok((out, Trace { geometry, layers, masks, features: s }))
    }

    /// Parameter gradients, in `params()` order, given `d loss / d output`.
    pub fn backward(&self, trace: &Trace<T>, dout: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (head, ds) = conv1d_backward(&trace.features, &self.head, ConvGeom::UNIT, dout, true)?;
        let mut ds = ds.expect("input gradient requested");
        let mut dc: Option<Tensor<T>> = None;
        let mut grads: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.blocks.len() + 2);
        let n = self.blocks.len();
        for idx in (0..=n).rev() {
            if let Some(mask) = &trace.masks[idx] {
                for (g, m) in ds.data.iter_mut().zip(&mask.data) {
                    *g *= *m;
                }
            }
            let (layer, geom) = if idx == 0 {
                (&self.input, ConvGeom::UNIT)
            } else {
                (&self.blocks[idx - 1], self.block_geom(idx - 1, trace.geometry))
            };
            match (layer, &trace.layers[idx]) {
                (Layer::Plain(conv), LayerCache::Plain { x, out }) => {
                    for (g, o) in ds.data.iter_mut().zip(&out.data) {
                        if *o <= T::zero() {
                            *g = T::zero();
                        }
                    }
                    let (g, dx) = conv1d_backward(x, conv, geom, &ds, idx > 0)?;
                    grads.push(vec![g.weight, g.bias]);
                    if let Some(dx) = dx {
                        ds = dx;
                    }
                }
                (Layer::Ca(block), LayerCache::Ca(cache)) => {
                    let g = ca_conv_backward(cache, block, geom, &ds, dc.as_ref())?;
                    grads.push(vec![g.pose.weight, g.pose.bias, g.conf.weight, g.conf.bias]);
                    ds = g.ds_in;
                    dc = Some(g.dc_in);
                }
                _ => return Err(shape("trace does not belong to this model")),
            }
        }
        grads.reverse();
        let ConvGrad { weight, bias } = head;
        grads.push(vec![weight, bias]);
        Ok(grads.into_iter().flatten().collect())
    }
}

/// Lifts a whole sequence: edge-replicated padding of half a receptive field
/// on both ends, then one prediction per frame, in millimeters.
pub fn predict_sequence<T: Real>(
    model: &LifterModel<T>,
    seq2d: &PoseSequence2D,
    conf: Option<&ConfidenceSequence>,
    padding: Padding,
) -> Result<PoseSequence3D> {
    let Padding::Edge = padding;
    let (t_len, j) = (seq2d.frames, seq2d.joints);
    if j != model.joints {
        return Err(shape(format!("model lifts {} joints, sequence has {j}", model.joints)));
    }
    if t_len == 0 {
        return Err(shape("cannot lift an empty sequence"));
    }
    if let Some(c) = conf {
        if c.frames != t_len || c.joints != j {
            return Err(shape("confidence sequence does not match the 2D sequence"));
        }
    }
    let pad = (model.receptive_field() - 1) / 2;
    let len = t_len + 2 * pad;
    let src = |i: usize| i.saturating_sub(pad).min(t_len - 1);
    let pose: Vec<T> = (0..len).flat_map(|i| seq2d.frame(src(i)).iter().map(|v| T::of(*v))).collect();
    let pose = Tensor::from_vec(&[len, 1, 2 * j], pose)?;
    let conf = conf
        .map(|c| {
            let data = (0..len).flat_map(|i| (0..j).map(move |jj| T::of(c.get(src(i), jj)))).collect();
            Tensor::from_vec(&[len, 1, j], data)
        })
        .transpose()?;
    let (out, _) = model.forward(&pose, conf.as_ref(), Geometry::Dense, None)?;
    let data = out.data.iter().map(|v| v.as_f64() * 1000.0).collect();
    PoseSequence3D::new(t_len, j, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> SkeletonLayout {
        SkeletonLayout::h36m16()
    }

    fn random_inputs(len: usize, batch: usize, j: usize, rng: &mut SeededRng) -> (Tensor<f64>, Tensor<f64>) {
        let pose = (0..len * batch * 2 * j).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        let conf = (0..len * batch * j).map(|_| rng.uniform()).collect();
        (
            Tensor::from_vec(&[len, batch, 2 * j], pose).unwrap(),
            Tensor::from_vec(&[len, batch, j], conf).unwrap(),
        )
    }

    fn random_seq(frames: usize, seed: u64) -> (PoseSequence2D, ConfidenceSequence) {
        let mut rng = SeededRng::new(seed, 0);
        let data = (0..frames * 32).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        let scores = (0..frames * 16).map(|_| rng.uniform()).collect();
        (
            PoseSequence2D::new(frames, 16, data, 1000, 1000).unwrap(),
            ConfidenceSequence::new(frames, 16, scores).unwrap(),
        )
    }

    #[test]
    fn receptive_fields() {
        assert_eq!(LifterConfig::default().receptive_field(), 27);
        assert_eq!(LifterConfig::with_receptive_field(1).unwrap().receptive_field(), 1);
        assert_eq!(LifterConfig::with_receptive_field(81).unwrap().num_blocks, 4);
        assert!(LifterConfig::with_receptive_field(10).is_err());
        let model: LifterModel<f64> =
            build_model(&LifterConfig { channels: 8, ..Default::default() }, &layout(), &SeededRng::new(0, 0)).unwrap();
        let (pose, _) = random_inputs(27, 1, 16, &mut SeededRng::new(1, 0));
        let (out, _) = model.forward(&pose, None, Geometry::Dense, None).unwrap();
        assert_eq!(out.dims, vec![1, 1, 48]);
    }

    #[test]
    fn parameter_count_regression() {
        let (j, d) = (16, 128);
        let expected = (2 * j * d + d) + 3 * (3 * d * d + d) + (d * 3 * j + 3 * j);
        assert_eq!(expected, 158_256);
        let model: LifterModel<f32> = build_model(&LifterConfig::default(), &layout(), &SeededRng::new(0, 0)).unwrap();
        assert_eq!(model.param_count(), 158_256);
        let ca: LifterModel<f32> = build_model(
            &LifterConfig { input_mode: InputMode::ConfidenceAware, ..Default::default() },
            &layout(),
            &SeededRng::new(0, 0),
        )
        .unwrap();
        assert_eq!(ca.param_count(), 158_256 + (j * d + d) + 3 * (3 * d * d + d));
    }

    #[test]
    fn init_is_he_uniform_with_confidence_bias() {
        let cfg = LifterConfig { input_mode: InputMode::ConfidenceAware, ..Default::default() };
        let model: LifterModel<f64> = build_model(&cfg, &layout(), &SeededRng::new(3, 0)).unwrap();
        for (name, t) in model.params() {
            if name.ends_with("conf.bias") {
                assert!(t.data.iter().all(|v| *v == CONF_BIAS_INIT), "{name}");
            } else if name.ends_with("bias") {
                assert!(t.data.iter().all(|v| *v == 0.0), "{name}");
            } else {
                let fan_in = (t.dims[0] * t.dims[1]) as f64;
                let gain = if name.ends_with("pose.weight") { gate_gain_at_init(cfg.gamma) } else { 1.0 };
                let bound = (6.0 / fan_in).sqrt() / gain;
                assert!(t.data.iter().all(|v| v.abs() <= bound), "{name}");
                let var = t.data.iter().map(|v| v * v).sum::<f64>() / t.len() as f64;
                assert!((var / (bound * bound / 3.0) - 1.0).abs() < 0.15, "{name} var {var}");
            }
        }
    }

    #[test]
    fn gated_init_matches_plain_activation_scale() {
        let mut rng = SeededRng::new(8, 0);
        let (pose, _) = random_inputs(27, 64, 16, &mut rng);
        let sig = 1.0 / (1.0 + (-CONF_BIAS_INIT).exp());
        let conf = Tensor::filled(&[27, 64, 16], sig);
        let rms = |mode, gamma| {
            let cfg = LifterConfig { input_mode: mode, gamma, dropout_rate: 0.0, ..Default::default() };
            let model: LifterModel<f64> = build_model(&cfg, &layout(), &SeededRng::new(9, 0)).unwrap();
            let (out, _) = model.forward(&pose, Some(&conf), Geometry::Strided, None).unwrap();
            (out.data.iter().map(|v| v * v).sum::<f64>() / out.len() as f64).sqrt()
        };
        let plain = rms(InputMode::PoseOnly, 1.0);
        for gamma in [0.0, 1.0, 3.0] {
            let ca = rms(InputMode::ConfidenceAware, gamma);
            assert!((ca / plain - 1.0).abs() < 0.5, "gamma {gamma}: {ca} vs {plain}");
        }
    }

    #[test]
    fn strided_matches_dense_centre() {
        let mut rng = SeededRng::new(4, 0);
        for mode in InputMode::ALL {
            let cfg = LifterConfig { input_mode: mode, channels: 16, ..Default::default() };
            let model: LifterModel<f64> = build_model(&cfg, &layout(), &rng.child("m")).unwrap();
            let (pose, conf) = random_inputs(27, 5, 16, &mut rng);
            let (a, _) = model.forward(&pose, Some(&conf), Geometry::Dense, None).unwrap();
            let (b, _) = model.forward(&pose, Some(&conf), Geometry::Strided, None).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12, "{mode}");
        }
    }

    #[test]
    fn pose_only_ignores_confidence() {
        let model: LifterModel<f32> =
            build_model(&LifterConfig { channels: 16, ..Default::default() }, &layout(), &SeededRng::new(5, 0)).unwrap();
        let (seq, conf) = random_seq(40, 6);
        let a = predict_sequence(&model, &seq, Some(&conf), Padding::Edge).unwrap();
        let b = predict_sequence(&model, &seq, None, Padding::Edge).unwrap();
        let mut other = conf.clone();
        other.scores.iter_mut().for_each(|v| *v = 1.0 - *v);
        let c = predict_sequence(&model, &seq, Some(&other), Padding::Edge).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn confidence_modes_need_confidence() {
        for mode in [InputMode::ConfConcat, InputMode::ConfidenceAware] {
            let cfg = LifterConfig { input_mode: mode, channels: 8, ..Default::default() };
            let model: LifterModel<f32> = build_model(&cfg, &layout(), &SeededRng::new(5, 0)).unwrap();
            let (seq, conf) = random_seq(30, 7);
            assert!(predict_sequence(&model, &seq, None, Padding::Edge).is_err());
            let out = predict_sequence(&model, &seq, Some(&conf), Padding::Edge).unwrap();
            assert_eq!(out.frames, 30);
        }
        let concat: LifterModel<f32> = build_model(
            &LifterConfig { input_mode: InputMode::ConfConcat, ..Default::default() },
            &layout(),
            &SeededRng::new(0, 0),
        )
        .unwrap();
        assert_eq!(concat.params()[0].1.dims, vec![1, 48, 128]);
    }

    #[test]
    fn single_frame_model_is_per_frame() {
        let cfg = LifterConfig { channels: 16, ..LifterConfig::with_receptive_field(1).unwrap() };
        let model: LifterModel<f64> = build_model(&cfg, &layout(), &SeededRng::new(8, 0)).unwrap();
        let (seq, _) = random_seq(20, 9);
        let out = predict_sequence(&model, &seq, None, Padding::Edge).unwrap();
        let perm: Vec<usize> = (0..20).map(|i| (i * 7) % 20).collect();
        let shuffled_data = perm.iter().flat_map(|&t| seq.frame(t).to_vec()).collect();
        let shuffled = PoseSequence2D::new(20, 16, shuffled_data, 1000, 1000).unwrap();
        let out_s = predict_sequence(&model, &shuffled, None, Padding::Edge).unwrap();
        for (i, &t) in perm.iter().enumerate() {
            assert_eq!(out_s.frame(i), out.frame(t));
        }
    }

    #[test]
    fn constant_input_gives_constant_output_and_short_sequences_work() {
        let model: LifterModel<f64> =
            build_model(&LifterConfig { channels: 16, ..Default::default() }, &layout(), &SeededRng::new(10, 0)).unwrap();
        let (one, _) = random_seq(1, 11);
        let constant = PoseSequence2D::new(15, 16, one.data.repeat(15), 1000, 1000).unwrap();
        let out = predict_sequence(&model, &constant, None, Padding::Edge).unwrap();
        for t in 1..15 {
            assert_eq!(out.frame(t), out.frame(0));
        }
        let single = predict_sequence(&model, &one, None, Padding::Edge).unwrap();
        assert_eq!(single.frames, 1);
        assert_eq!(single.frame(0), out.frame(0));
    }

    #[test]
    fn dropout_only_when_requested() {
        let model: LifterModel<f32> =
            build_model(&LifterConfig { channels: 16, ..Default::default() }, &layout(), &SeededRng::new(12, 0)).unwrap();
        let (seq, _) = random_seq(30, 13);
        assert_eq!(
            predict_sequence(&model, &seq, None, Padding::Edge).unwrap(),
            predict_sequence(&model, &seq, None, Padding::Edge).unwrap()
        );
        let (pose, _) = random_inputs(27, 2, 16, &mut SeededRng::new(14, 0));
        let pose = pose.cast::<f32>();
        let (a, _) = model.forward(&pose, None, Geometry::Strided, None).unwrap();
        let (b, _) = model.forward(&pose, None, Geometry::Strided, Some(&mut SeededRng::new(1, 0))).unwrap();
        assert!(a.max_abs_diff(&b) > 0.0);
    }

    #[test]
    fn input_mode_round_trips() {
        for m in InputMode::ALL {
            assert_eq!(m.as_str().parse::<InputMode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
    }
}
