//! Central finite-difference verification of every backward pass, in f64.

use serde::Serialize;

use crate::error::Result;
use crate::rng::SeededRng;

use super::caconv::{ca_conv_backward, ca_conv_forward, CaConv};
use super::conv::{conv1d_backward, conv1d_forward, Conv, ConvGeom};
use super::model::{build_for_joints, Geometry, InputMode, LifterConfig, LifterModel};
use super::tensor::Tensor;
use super::train::mpjpe_loss;

pub const TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct GradCheckOptions {
    pub seeds: u64,
    /// `case/parameter` whose analytic gradient gets a deliberate error, for
    /// exercising the failure path.
    pub perturb: Option<String>,
}

impl GradCheckOptions {
    pub fn new(seeds: u64) -> Self {
        Self { seeds, perturb: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckEntry {
    pub case: String,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
    /// Elements whose finite difference straddled a ReLU kink.
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_error <= self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<32} {:>14} {:>8} {:>8}  worst parameter\n", "case", "max rel error", "checked", "skipped");
        for e in &self.entries {
            let flag = if e.max_rel_error <= self.tolerance { "" } else { "  FAIL" };
            out.push_str(&format!(
                "{:<32} {:>14.3e} {:>8} {:>8}  {}{flag}\n",
                e.case, e.max_rel_error, e.checked, e.skipped, e.worst_param
            ));
        }
        out.push_str(&format!(
            "{} (tolerance {:.0e})\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.tolerance
        ));
        out
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

type Eval<'a> = dyn Fn(&[Tensor<f64>]) -> Result<(f64, Vec<bool>)> + 'a;

struct Case<'a> {
    perturb: Option<&'a str>,
    entry: GradCheckEntry,
}

impl<'a> Case<'a> {
    fn new(name: &'a str, perturb: Option<&'a str>) -> Self {
        let perturb = perturb.and_then(|p| p.strip_prefix(name)).and_then(|p| p.strip_prefix('/'));
        let entry = GradCheckEntry { case: name.into(), max_rel_error: 0.0, worst_param: String::new(), checked: 0, skipped: 0 };
        Self { perturb, entry }
    }

    /// Checks the first `names.len()` tensors of `params`.
    fn check(&mut self, names: &[&str], params: &[Tensor<f64>], analytic: &[Tensor<f64>], eval: &Eval) -> Result<()> {
        let (_, pattern) = eval(params)?;
        for (i, name) in names.iter().enumerate() {
            for e in 0..params[i].len() {
                let mut p = params.to_vec();
                p[i].data[e] = params[i].data[e] + STEP;
                let (fp, pp) = eval(&p)?;
                p[i].data[e] = params[i].data[e] - STEP;
                let (fm, pm) = eval(&p)?;
                if pp != pattern || pm != pattern {
                    self.entry.skipped += 1;
                    continue;
                }
                let numeric = (fp - fm) / (2.0 * STEP);
                let mut a = analytic[i].data[e];
                if e == 0 && self.perturb == Some(name) {
                    a += 1e-3;
                }
                let err = relative_error(a, numeric);
                self.entry.checked += 1;
                if err > self.entry.max_rel_error || self.entry.worst_param.is_empty() {
                    self.entry.max_rel_error = err.max(self.entry.max_rel_error);
                    self.entry.worst_param = format!("{name}[{e}]");
                }
            }
        }
        Ok(())
    }
}

fn random(dims: &[usize], rng: &mut SeededRng, lo: f64, hi: f64) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor { dims: dims.to_vec(), data: (0..n).map(|_| rng.uniform_range(lo, hi)).collect() }
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

fn check_conv(case: &mut Case, geom: ConvGeom, len: usize, rng: &mut SeededRng) -> Result<()> {
    let conv = Conv::<f64>::he_uniform(3, 8, 6, 0.0, rng);
    let params = vec![random(&[len, 2, 8], rng, -1.0, 1.0), conv.weight, random(&[6], rng, -0.5, 0.5)];
    let build = |p: &[Tensor<f64>]| Conv { weight: p[1].clone(), bias: p[2].clone() };
    let out = conv1d_forward(&params[0], &build(&params), geom)?;
    let r = random(&out.dims, rng, -1.0, 1.0);
    let (g, dx) = conv1d_backward(&params[0], &build(&params), geom, &r, true)?;
    let analytic = vec![dx.expect("input gradient requested"), g.weight, g.bias];
    let eval = |p: &[Tensor<f64>]| Ok((dot(&conv1d_forward(&p[0], &build(p), geom)?, &r), Vec::new()));
    case.check(&["x", "weight", "bias"], &params, &analytic, &eval)
}

/// `gate_only` zeroes the confidence convolution and drops its output from
/// the loss, leaving the gate as the only route to the confidence input.
fn check_ca(case: &mut Case, group: usize, kernel: usize, gate_only: bool, rng: &mut SeededRng) -> Result<()> {
    let (ds, dc, dout) = (8, 8 / group, 6);
    let mut conf = Conv::<f64>::he_uniform(kernel, dc, dout, 0.0, rng);
    conf.bias = random(&[dout], rng, -0.5, 0.5);
    if gate_only {
        conf.weight.data.fill(0.0);
    }
    let params = vec![
        random(&[5, 2, ds], rng, -1.0, 1.0),
        random(&[5, 2, dc], rng, 0.05, 0.95),
        Conv::<f64>::he_uniform(kernel, ds, dout, 0.0, rng).weight,
        random(&[dout], rng, -0.3, 0.3),
        conf.weight,
        conf.bias,
    ];
    let gamma = rng.uniform_range(0.1, 1.5);
    let block = |p: &[Tensor<f64>]| CaConv {
        pose: Conv { weight: p[2].clone(), bias: p[3].clone() },
        conf: Conv { weight: p[4].clone(), bias: p[5].clone() },
        gamma,
        group,
    };
    let (s_out, c_out, cache) = ca_conv_forward(&params[0], &params[1], &block(&params), ConvGeom::UNIT)?;
    let rs = random(&s_out.dims, rng, -1.0, 1.0);
    let rc = if gate_only { Tensor::zeros(&c_out.dims) } else { random(&c_out.dims, rng, -1.0, 1.0) };
    let g = ca_conv_backward(&cache, &block(&params), ConvGeom::UNIT, &rs, (!gate_only).then_some(&rc))?;
    let analytic = vec![g.ds_in, g.dc_in, g.pose.weight, g.pose.bias, g.conf.weight, g.conf.bias];
    let eval = |p: &[Tensor<f64>]| {
        let (s, c, _) = ca_conv_forward(&p[0], &p[1], &block(p), ConvGeom::UNIT)?;
        Ok((dot(&s, &rs) + dot(&c, &rc), s.data.iter().map(|v| *v > 0.0).collect()))
    };
    let names = ["s_in", "c_in", "pose.weight", "pose.bias", "conf.weight", "conf.bias"];
    let n = if gate_only { 2 } else { names.len() };
    case.check(&names[..n], &params, &analytic, &eval)
}

fn check_model(case: &mut Case, mode: InputMode, geometry: Geometry, rng: &mut SeededRng) -> Result<()> {
    let j = 4;
    let config = LifterConfig { input_mode: mode, num_blocks: 2, kernel: 3, channels: 6, dropout_rate: 0.0, gamma: 0.8 };
    let mut model: LifterModel<f64> = build_for_joints(&config, j, &rng.child("init"))?;
    // Non-zero biases so every code path carries signal.
    for p in model.params_mut() {
        if p.dims.len() == 1 {
            for v in &mut p.data {
                *v += rng.uniform_range(-0.2, 0.2);
            }
        }
    }
    let (len, batch) = match geometry {
        Geometry::Dense => (11, 2),
        Geometry::Strided => (9, 3),
    };
    let pose = random(&[len, batch, 2 * j], rng, -0.6, 0.6);
    let conf = random(&[len, batch, j], rng, 0.05, 1.0);
    let (out, trace) = model.forward(&pose, Some(&conf), geometry, None)?;
    let target: Vec<f64> = (0..out.len()).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
    let (_, dout) = mpjpe_loss(&out, &target)?;
    let analytic = model.backward(&trace, &dout)?;
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let params: Vec<Tensor<f64>> = model.params().into_iter().map(|(_, t)| t.clone()).collect();
    let eval = |p: &[Tensor<f64>]| {
        let mut m = model.clone();
        for (dst, src) in m.params_mut().into_iter().zip(p) {
            dst.data.copy_from_slice(&src.data);
        }
        let (out, trace) = m.forward(&pose, Some(&conf), geometry, None)?;
        Ok((mpjpe_loss(&out, &target)?.0, trace.active_units()))
    };
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    case.check(&name_refs, &params, &analytic, &eval)
}

/// Runs every case over `options.seeds` random draws.
pub fn run_gradcheck(options: &GradCheckOptions) -> Result<GradCheckReport> {
    let perturb = options.perturb.as_deref();
    let mut entries = Vec::new();
    let mut run = |name: &str, f: &dyn Fn(&mut Case, &mut SeededRng) -> Result<()>| -> Result<()> {
        let mut case = Case::new(name, perturb);
        for seed in 0..options.seeds.max(1) {
            f(&mut case, &mut SeededRng::new(seed, 0).child(name))?;
        }
        entries.push(case.entry);
        Ok(())
    };
    run("conv", &|c, r| check_conv(c, ConvGeom::UNIT, 5, r))?;
    run("conv_dilated", &|c, r| check_conv(c, ConvGeom::dilated(2), 7, r))?;
    run("conv_strided", &|c, r| check_conv(c, ConvGeom { dilation: 1, stride: 3 }, 9, r))?;
    run("ca_conv", &|c, r| check_ca(c, 1, 3, false, r))?;
    run("ca_conv_gate_path", &|c, r| check_ca(c, 1, 3, true, r))?;
    run("ca_conv_input", &|c, r| check_ca(c, 2, 1, false, r))?;
    for mode in InputMode::ALL {
        for (geometry, tag) in [(Geometry::Dense, "dense"), (Geometry::Strided, "strided")] {
            let name = format!("model_{mode}_{tag}");
            run(&name, &|c, r| check_model(c, mode, geometry, r))?;
        }
    }
    Ok(GradCheckReport { tolerance: TOLERANCE, entries })
}
