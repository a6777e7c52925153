//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat vector: for every layer, the `out x in`
//! weight matrix (row-major) followed by the `out` biases.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
            // log(1 + e^z) without overflow
            Activation::Softplus => {
                if z > 0.0 {
                    z + libm::log1p(libm::exp(-z))
                } else {
                    libm::log1p(libm::exp(z))
                }
            }
        }
    }

    /// Derivative from the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
            Activation::Softplus => 1.0 / (1.0 + libm::exp(-z)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Softplus => "softplus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    pub fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

/// Shape descriptor of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    layers: Vec<LayerShape>,
}

impl Layout {
    pub fn new(layers: Vec<LayerShape>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Validation(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        if layers.iter().any(|l| l.inputs == 0 || l.outputs == 0) {
            return Err(Error::Validation("layer widths must be positive".into()));
        }
        Ok(Self { layers })
    }

    /// Layers `input -> widths[0] -> ... -> widths[last]`, all with `activation`
    /// except the last, which uses `last_activation`.
    pub fn chain(input: usize, widths: &[usize], activation: Activation, last_activation: Activation) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() { last_activation } else { activation };
            layers.push(LayerShape { inputs: prev, outputs: w, activation: act });
            prev = w;
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerShape::param_count).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }
}

/// Flat parameter (or gradient) vector with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layout: Layout,
    params: Vec<f64>,
}

/// Activations of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `values[0]` is the input; `values[i + 1]` the output of layer `i`.
    values: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }
}

impl DenseNet {
    pub fn zeros(layout: Layout) -> Self {
        let params = vec![0.0; layout.param_count()];
        Self { layout, params }
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn init<R: Rng + ?Sized>(layout: Layout, rng: &mut R) -> Self {
        let mut net = Self::zeros(layout);
        let mut offset = 0;
        for shape in net.layout.layers.clone() {
            let bound = 1.0 / libm::sqrt(shape.inputs as f64);
            for w in &mut net.params[offset..offset + shape.inputs * shape.outputs] {
                *w = rng.random_range(-bound..=bound);
            }
            offset += shape.param_count();
        }
        net
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layout.output_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn flatten(&self) -> ParamVector {
        ParamVector { values: self.params.clone(), layout: self.layout.clone() }
    }

    pub fn unflatten(p: &ParamVector) -> Result<Self> {
        if p.values.len() != p.layout.param_count() {
            return Err(Error::Validation(format!(
                "{} parameter values for a layout of {}",
                p.values.len(),
                p.layout.param_count()
            )));
        }
        Ok(Self { layout: p.layout.clone(), params: p.values.clone() })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.trace(input)?;
        Ok(trace.values.pop().unwrap_or_default())
    }

    /// Forward pass keeping every intermediate for [`DenseNet::backward`].
    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "input of length {} for a network expecting {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network input".into()));
        }
        let mut values = Vec::with_capacity(self.layout.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layout.layers.len());
        values.push(input.to_vec());
        let mut offset = 0;
        for (li, shape) in self.layout.layers.iter().enumerate() {
            let x = &values[li];
            let w = &self.params[offset..offset + shape.inputs * shape.outputs];
            let b = &self.params[offset + shape.inputs * shape.outputs..offset + shape.param_count()];
            let z: Vec<f64> = w
                .chunks_exact(shape.inputs)
                .zip(b)
                .map(|(row, &bias)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias)
                .collect();
            let y: Vec<f64> = z.iter().map(|&v| shape.activation.apply(v)).collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("network layer {li}")));
            }
            pre.push(z);
            values.push(y);
            offset += shape.param_count();
        }
        Ok(Trace { values, pre })
    }

    /// Gradients of `<output_grad, forward(input)>` with respect to the
    /// parameters and the input.
    pub fn backward(&self, trace: &Trace, output_grad: &[f64]) -> Result<(ParamVector, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(trace, output_grad, 1.0, &mut grad)?;
        Ok((ParamVector { values: grad, layout: self.layout.clone() }, input_grad))
    }

    /// Adds `scale` times the parameter gradient into `param_grad`; returns the
    /// input gradient.
    pub fn backward_into(&self, trace: &Trace, output_grad: &[f64], scale: f64, param_grad: &mut [f64]) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_dim() || param_grad.len() != self.params.len() {
            return Err(Error::Contract("gradient shape does not match the network".into()));
        }
        if trace.pre.len() != self.layout.layers.len() {
            return Err(Error::Contract("trace does not come from this network".into()));
        }
        let mut offsets = Vec::with_capacity(self.layout.layers.len());
        let mut acc = 0;
        for shape in &self.layout.layers {
            offsets.push(acc);
            acc += shape.param_count();
        }
        let mut upstream: Vec<f64> = output_grad.iter().map(|g| g * scale).collect();
        for li in (0..self.layout.layers.len()).rev() {
            let shape = self.layout.layers[li];
            let offset = offsets[li];
            let x = &trace.values[li];
            let y = &trace.values[li + 1];
            let z = &trace.pre[li];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(y))
                .map(|(g, (&zv, &yv))| g * shape.activation.derivative(zv, yv))
                .collect();
            let wlen = shape.inputs * shape.outputs;
            for (o, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut param_grad[offset + o * shape.inputs..offset + (o + 1) * shape.inputs];
                for (slot, &xv) in row.iter_mut().zip(x) {
                    *slot += g * xv;
                }
                param_grad[offset + wlen + o] += g;
            }
            let w = &self.params[offset..offset + wlen];
            let mut down = vec![0.0; shape.inputs];
            for (row, &g) in w.chunks_exact(shape.inputs).zip(&dz) {
                if g == 0.0 {
                    continue;
                }
                for (d, &wv) in down.iter_mut().zip(row) {
                    *d += g * wv;
                }
            }
            upstream = down;
        }
        if upstream.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network gradient".into()));
        }
        Ok(upstream)
    }
}
