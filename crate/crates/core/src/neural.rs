//! Small fully connected networks with exact reverse-mode gradients and Adam.
//!
//! Sized for the actor and critic networks: dense layers, ReLU / tanh /
//! linear activations and an optional scale on the final output. Batches are
//! row-major `batch x features` matrices.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative given pre-activation `z` and activation `a`. ReLU uses 0 at z = 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`; row i holds the weights of output unit i.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output_scale: f64,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }
}

/// Activations saved by a forward pass for the matching backward pass.
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>, output_scale: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension(format!("layer {i}: bias length {} != outputs {}", l.bias.len(), l.outputs())));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::Dimension(format!(
                    "layer {i}: expects {} inputs, previous layer gives {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::config(format!("layer {i}: non-finite parameters")));
            }
        }
        if !output_scale.is_finite() {
            return Err(Error::config("non-finite output scale"));
        }
        Ok(Self { layers, output_scale })
    }

    /// Hidden layers uniform in +-1/sqrt(fan_in); final layer uniform in +-`final_init`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        final_init: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("bad layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let last = i + 1 == n;
                let bound = if last { final_init } else { 1.0 / (fan_in as f64).sqrt() };
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || uniform(rng, -bound, bound));
                let bias = Array1::from_shape_simple_fn(fan_out, || uniform(rng, -bound, bound));
                Dense {
                    weights,
                    bias,
                    activation: if last { output } else { hidden },
                }
            })
            .collect();
        Self::from_layers(layers, output_scale)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        Ok(self.forward_batch(&batch)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        if self.output_scale != 1.0 {
            a.mapv_inplace(|v| v * self.output_scale);
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            let out = z.mapv(|v| l.activation.apply(v));
            cache.inputs.push(a);
            cache.pre.push(z);
            cache.post.push(out.clone());
            a = out;
        }
        let y = a.mapv(|v| v * self.output_scale);
        Ok((y, cache))
    }

    /// Gradients of `sum(upstream .* y)` w.r.t. parameters and inputs, where
    /// `y` is the output of the forward pass that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let last = cache.post.last().expect("non-empty cache");
        if upstream.dim() != last.dim() {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                last.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream * self.output_scale;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let mut dz = delta;
            ndarray::Zip::from(&mut dz)
                .and(&cache.pre[i])
                .and(&cache.post[i])
                .for_each(|d, &z, &a| *d *= l.activation.derivative(z, a));
            let dw = dz.t().dot(&cache.inputs[i]);
            let db = dz.sum_axis(Axis(0));
            delta = dz.dot(&l.weights);
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(NetworkFile::from(self)).expect("serializable")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&NetworkFile::from(self))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk layout: `{"layers":[{"in","out","activation","W","b"}],"output_scale"}`.
/// serde_json writes the shortest decimal that round-trips each f64 exactly.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    layers: Vec<LayerFile>,
    output_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    #[serde(rename = "in")]
    inputs: usize,
    #[serde(rename = "out")]
    outputs: usize,
    activation: Activation,
    #[serde(rename = "W")]
    weights: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    bias: Vec<f64>,
}

impl From<&Mlp> for NetworkFile {
    fn from(net: &Mlp) -> Self {
        NetworkFile {
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            output_scale: net.output_scale,
        }
    }
}

impl TryFrom<NetworkFile> for Mlp {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                if l.weights.len() != l.outputs || l.weights.iter().any(|r| r.len() != l.inputs) {
                    return Err(Error::Dimension(format!("layer {i}: W is not {}x{}", l.outputs, l.inputs)));
                }
                let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
                Ok(Dense {
                    weights: Array2::from_shape_vec((l.outputs, l.inputs), flat).expect("checked shape"),
                    bias: Array1::from_vec(l.bias),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, file.output_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Gradients,
    second: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }
}

/// Bias-corrected Adam on flat slices; `step` is the 1-based step count.
pub fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamConfig) {
    let t = step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() {
        return Err(Error::Dimension("gradient layer count differs from network".into()));
    }
    state.step += 1;
    let step = state.step;
    let cfg = state.config;
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[i];
        let (mw, mb) = &mut state.first.layers[i];
        let (vw, vb) = &mut state.second.layers[i];
        if gw.dim() != layer.weights.dim() || gb.len() != layer.bias.len() {
            return Err(Error::Dimension(format!("layer {i}: gradient shape mismatch")));
        }
        adam_update(
            layer.weights.as_slice_mut().expect("contiguous"),
            gw.as_standard_layout().as_slice().expect("contiguous"),
            mw.as_slice_mut().expect("contiguous"),
            vw.as_slice_mut().expect("contiguous"),
            step,
            &cfg,
        );
        adam_update(
            layer.bias.as_slice_mut().expect("contiguous"),
            gb.as_slice().expect("contiguous"),
            mb.as_slice_mut().expect("contiguous"),
            vb.as_slice_mut().expect("contiguous"),
            step,
            &cfg,
        );
    }
    Ok(())
}

/// target <- tau * online + (1 - tau) * target.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert_eq!(target.layers.len(), online.layers.len(), "network shapes differ");
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        ndarray::Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        ndarray::Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
}
