//! Central-difference verification of the analytic gradients.
//!
//! The network is piecewise linear in any single parameter, so away from ReLU
//! kinks a central difference of the quadratic loss is exact up to rounding.
//! A coordinate is skipped when nudging it by the step flips any ReLU.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::ConvLayer;
use crate::error::Result;
use crate::imaging::ImagePlane;
use crate::model::{Hyperparams, MssrModel};
use crate::ops::{relu_backward, relu_forward};
use crate::tensor::{Shape, Tensor4};
use crate::train::{loss_and_grad, TrainSample};

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Denominator floor so gradients that vanish analytically are compared in
/// absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectedBug {
    Bias,
    Weight,
    Input,
}

impl std::str::FromStr for InjectedBug {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bias" => Ok(InjectedBug::Bias),
            "weight" => Ok(InjectedBug::Weight),
            "input" => Ok(InjectedBug::Input),
            _ => Err(format!("unknown bug {s:?} (expected bias, weight or input)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub hyper: Hyperparams,
    pub height: usize,
    pub width: usize,
    pub batch: usize,
    pub step: f64,
    pub tolerance: f64,
    pub inject: Option<InjectedBug>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            seed: 0,
            hyper: Hyperparams::default().with_width(4),
            height: 7,
            width: 7,
            batch: 2,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            inject: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_err < self.tolerance)
    }

    pub fn skipped(&self) -> usize {
        self.groups.iter().map(|g| g.skipped).sum()
    }

    pub fn checked(&self) -> usize {
        self.groups.iter().map(|g| g.checked).sum()
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

#[derive(Default)]
struct Accum {
    max: f64,
    checked: usize,
    skipped: usize,
}

impl Accum {
    fn finish(self, name: impl Into<String>) -> GroupError {
        GroupError {
            name: name.into(),
            max_rel_err: self.max,
            checked: self.checked,
            skipped: self.skipped,
        }
    }
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: Shape, lo: f64, hi: f64) -> Tensor4<f64> {
    Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(lo..hi)).expect("valid shape")
}

/// Random model: He weights plus small random biases, so no unit sits at an
/// exact zero pre-activation. The last layer is scaled down to keep the
/// residual, and with it the loss, of order one; a large loss would drown
/// small gradients in the rounding error of the difference quotient.
pub fn random_model(hyper: Hyperparams, seed: u64) -> Result<MssrModel<f64>> {
    let mut model = MssrModel::he_init(hyper, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let count = hyper.layer_count();
    for (k, layer) in model.layers_mut().enumerate() {
        for b in layer.bias_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
        if k + 1 == count {
            layer.weights_mut().iter_mut().for_each(|v| *v *= 0.1);
            layer.bias_mut().iter_mut().for_each(|v| *v *= 0.1);
        }
    }
    Ok(model)
}

/// Random batch of samples with inputs in `[0, 1]` and residual targets in
/// `[-0.5, 0.5]`.
pub fn random_batch(height: usize, width: usize, batch: usize, seed: u64) -> Vec<TrainSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba7c);
    (0..batch)
        .map(|i| {
            let x = ImagePlane::from_fn(height, width, |_, _| rng.random_range(0.0..1.0)).unwrap();
            let r = ImagePlane::from_fn(height, width, |_, _| rng.random_range(-0.5..0.5)).unwrap();
            TrainSample::new(x, r, [2, 3, 4][i % 3]).unwrap()
        })
        .collect()
}

/// Loss and ReLU sign pattern at the model's current parameters.
fn probe(model: &MssrModel<f64>, x: &Tensor4<f64>, r: &Tensor4<f64>) -> Result<(f64, Vec<bool>)> {
    let trace = model.forward_traced(x)?;
    let sse: f64 = trace
        .residual()
        .as_slice()
        .iter()
        .zip(r.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    let b = x.shape().batch as f64;
    Ok((sse / (2.0 * b), trace.activation_pattern()))
}

fn layer_names(hyper: &Hyperparams) -> Vec<String> {
    let mut names = Vec::with_capacity(hyper.layer_count());
    for block in 1..=2 {
        for k in 1..=hyper.long_depth {
            names.push(format!("block{block}.conv{k}"));
        }
    }
    for k in 1..=hyper.recon_depth {
        names.push(format!("recon.conv{k}"));
    }
    names
}

/// Checks the gradient of the training loss with respect to every parameter
/// and every input pixel of a random model on a random batch.
pub fn check_model(
    model: &MssrModel<f64>,
    batch: &[TrainSample<f64>],
    step: f64,
    inject: Option<InjectedBug>,
) -> Result<Vec<GroupError>> {
    let hyper = model.hyperparams();
    let (h, w) = batch[0].x.dims();
    let x = Tensor4::stack_planes(h, w, batch.iter().map(|s| s.x.as_slice()))?;
    let r = Tensor4::stack_planes(h, w, batch.iter().map(|s| s.r.as_slice()))?;

    // analytic
    let mut m = model.clone();
    m.zero_grad();
    loss_and_grad(&mut m, batch)?;
    let mut grads = m.flatten_grads();
    let trace = m.forward_traced(&x)?;
    let scale = 1.0 / batch.len() as f64;
    let g_res = Tensor4::from_vec(
        x.shape(),
        trace
            .residual()
            .as_slice()
            .iter()
            .zip(r.as_slice())
            .map(|(p, t)| (p - t) * scale)
            .collect(),
    )?;
    let mut scratch = m.clone();
    scratch.zero_grad();
    let mut grad_x = scratch.backward(&trace, &g_res)?.into_vec();

    match inject {
        Some(InjectedBug::Bias) => grads[hyper.layer_shapes()[0].0 * 9] += 0.05,
        Some(InjectedBug::Weight) => grads[0] += 0.05,
        Some(InjectedBug::Input) => grad_x[0] += 0.05,
        None => {}
    }

    let (_, base_pattern) = probe(model, &x, &r)?;
    let mut params = model.flatten_params();
    let mut probe_model = model.clone();
    let mut groups = Vec::new();
    let mut offset = 0;
    for (name, (o, c)) in layer_names(&hyper).into_iter().zip(hyper.layer_shapes()) {
        let n = o * c * 9 + o;
        let mut acc = Accum::default();
        for i in offset..offset + n {
            let orig = params[i];
            params[i] = orig + step;
            probe_model.set_params(&params)?;
            let (lp, pp) = probe(&probe_model, &x, &r)?;
            params[i] = orig - step;
            probe_model.set_params(&params)?;
            let (lm, pm) = probe(&probe_model, &x, &r)?;
            params[i] = orig;
            if pp != base_pattern || pm != base_pattern {
                acc.skipped += 1;
                continue;
            }
            acc.max = acc.max.max(rel_err(grads[i], (lp - lm) / (2.0 * step)));
            acc.checked += 1;
        }
        groups.push(acc.finish(name));
        offset += n;
    }

    let mut acc = Accum::default();
    for i in 0..x.shape().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[i] += step;
        let (lp, pp) = probe(model, &xp, &r)?;
        let mut xm = x.clone();
        xm.as_mut_slice()[i] -= step;
        let (lm, pm) = probe(model, &xm, &r)?;
        if pp != base_pattern || pm != base_pattern {
            acc.skipped += 1;
            continue;
        }
        acc.max = acc.max.max(rel_err(grad_x[i], (lp - lm) / (2.0 * step)));
        acc.checked += 1;
    }
    groups.push(acc.finish("input"));
    Ok(groups)
}

/// Checks one conv layer followed by ReLU under `0.5 * sum(out^2)`.
fn check_conv_relu(rng: &mut ChaCha8Rng, step: f64, inject: Option<InjectedBug>) -> Result<Vec<GroupError>> {
    let (cin, cout) = (2, 3);
    let x = uniform_tensor(rng, Shape::new(2, cin, 5, 4), -1.0, 1.0);
    let weights = (0..cin * cout * 9).map(|_| rng.random_range(-0.5..0.5)).collect();
    let bias = (0..cout).map(|_| rng.random_range(-0.2..0.2)).collect();
    let layer = ConvLayer::from_parts(cin, cout, weights, bias)?;

    let loss = |l: &ConvLayer<f64>, x: &Tensor4<f64>| -> Result<(f64, Vec<bool>)> {
        let z = l.forward(x)?;
        let pattern = z.as_slice().iter().map(|&v| v > 0.0).collect();
        Ok((0.5 * relu_forward(&z).sum_squares(), pattern))
    };

    let mut analytic = layer.clone();
    let z = analytic.forward(&x)?;
    let a = relu_forward(&z);
    let gz = relu_backward(&z, &a)?;
    let mut gx = analytic.backward(&x, &gz)?.into_vec();
    let mut gw = analytic.grad_weights().to_vec();
    let mut gb = analytic.grad_bias().to_vec();
    match inject {
        Some(InjectedBug::Bias) => gb[0] += 0.05,
        Some(InjectedBug::Weight) => gw[0] += 0.05,
        Some(InjectedBug::Input) => gx[0] += 0.05,
        None => {}
    }
    let (_, base) = loss(&layer, &x)?;

    let mut groups = Vec::new();
    for (name, analytic) in [("conv2d.weights", &gw), ("conv2d.bias", &gb)] {
        let mut acc = Accum::default();
        for (i, &g) in analytic.iter().enumerate() {
            let mut p = layer.clone();
            let mut m = layer.clone();
            if name.ends_with("weights") {
                p.weights_mut()[i] += step;
                m.weights_mut()[i] -= step;
            } else {
                p.bias_mut()[i] += step;
                m.bias_mut()[i] -= step;
            }
            let ((lp, pp), (lm, pm)) = (loss(&p, &x)?, loss(&m, &x)?);
            if pp != base || pm != base {
                acc.skipped += 1;
                continue;
            }
            acc.max = acc.max.max(rel_err(g, (lp - lm) / (2.0 * step)));
            acc.checked += 1;
        }
        groups.push(acc.finish(name));
    }
    let mut acc = Accum::default();
    for (i, &g) in gx.iter().enumerate() {
        let mut xp = x.clone();
        xp.as_mut_slice()[i] += step;
        let mut xm = x.clone();
        xm.as_mut_slice()[i] -= step;
        let ((lp, pp), (lm, pm)) = (loss(&layer, &xp)?, loss(&layer, &xm)?);
        if pp != base || pm != base {
            acc.skipped += 1;
            continue;
        }
        acc.max = acc.max.max(rel_err(g, (lp - lm) / (2.0 * step)));
        acc.checked += 1;
    }
    groups.push(acc.finish("conv2d.input"));
    Ok(groups)
}

/// ReLU alone, away from the kink.
fn check_relu(rng: &mut ChaCha8Rng, step: f64) -> Result<GroupError> {
    let x = uniform_tensor(rng, Shape::new(1, 2, 4, 4), -1.0, 1.0);
    let g = relu_backward(&x, &relu_forward(&x))?;
    let mut acc = Accum::default();
    for i in 0..x.shape().len() {
        let v = x.as_slice()[i];
        if v.abs() <= 1e-3 {
            acc.skipped += 1;
            continue;
        }
        let f = |d: f64| {
            let mut t = x.clone();
            t.as_mut_slice()[i] = v + d;
            0.5 * relu_forward(&t).sum_squares()
        };
        acc.max = acc.max.max(rel_err(g.as_slice()[i], (f(step) - f(-step)) / (2.0 * step)));
        acc.checked += 1;
    }
    Ok(acc.finish("relu"))
}

/// Runs the primitive, model and loss suites in 64-bit.
pub fn run(config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut groups = check_conv_relu(&mut rng, config.step, config.inject)?;
    groups.push(check_relu(&mut rng, config.step)?);
    let model = random_model(config.hyper, config.seed)?;
    let batch = random_batch(config.height, config.width, config.batch, config.seed);
    groups.extend(check_model(&model, &batch, config.step, config.inject)?);
    Ok(GradCheckReport {
        groups,
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes() {
        let report = run(&GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report:#?}");
        assert!(report.checked() > 10 * report.skipped(), "{report:#?}");
    }

    #[test]
    fn injected_bugs_are_caught() {
        for bug in [InjectedBug::Bias, InjectedBug::Weight, InjectedBug::Input] {
            let config = GradCheckConfig {
                hyper: Hyperparams { long_depth: 2, short_depth: 1, recon_depth: 1, width: 2 },
                height: 4,
                width: 4,
                inject: Some(bug),
                ..Default::default()
            };
            assert!(!run(&config).unwrap().passed(), "{bug:?}");
        }
    }

    #[test]
    fn shared_layer_gradient_sums_both_paths() {
        // N_L = 2, tap after layer 1: layer 1 feeds the block output directly
        // and through layer 2
        let hyper = Hyperparams { long_depth: 2, short_depth: 1, recon_depth: 1, width: 3 };
        let model = random_model(hyper, 7).unwrap();
        let batch = random_batch(6, 5, 1, 7);
        let groups = check_model(&model, &batch, DEFAULT_STEP, None).unwrap();
        let shared = groups.iter().find(|g| g.name == "block1.conv1").unwrap();
        assert!(shared.checked > 0 && shared.max_rel_err < 1e-4, "{groups:#?}");
        assert!(groups.iter().all(|g| g.max_rel_err < 1e-4), "{groups:#?}");
    }
}
