//! Trainable networks: the C1 sequence encoder with a direct multi-step
//! readout, and the C2 horizon refiner.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{affine, affine_backward, CellKind, CellTrace, RecurrentCell};
use super::loss::Loss;
use crate::error::{Error, Result};

/// Affine map `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: alloc::vec![0.0; inputs * outputs], bias: alloc::vec![0.0; outputs] }
    }

    pub fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(inputs, outputs);
        let bound = 1.0 / libm::sqrt(inputs as f64);
        for w in &mut d.weights {
            *w = rng.random_range(-bound..=bound);
        }
        d
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.outputs];
        affine(&self.weights, &self.bias, x, 0..self.outputs, &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = alloc::vec![0.0; self.inputs];
        affine_backward(&self.weights, x, dy, 0..self.outputs, &mut grad.weights, &mut grad.bias, &mut dx);
        dx
    }
}

/// What a parameter tensor is, for regularisation and gradient-check scoping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    RecurrentWeight,
    RecurrentBias,
    ReadoutWeight,
    ReadoutBias,
}

impl TensorRole {
    pub fn is_weight(self) -> bool {
        matches!(self, Self::RecurrentWeight | Self::ReadoutWeight)
    }

    pub fn is_readout(self) -> bool {
        matches!(self, Self::ReadoutWeight | Self::ReadoutBias)
    }
}

/// One supervised example. For the encoder `input` is the `L × m` window and
/// `context` is empty; for the refiner `input` is the C1 forecast and
/// `context` the `h × p` prospective channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub context: Vec<f64>,
    pub target: Vec<f64>,
}

/// A network trainable by [`super::train::fit_network`].
pub trait Network: Clone {
    /// Inference-mode output (no dropout).
    fn predict(&self, sample: &Sample) -> Result<Vec<f64>>;

    /// Forward pass with inverted dropout at rate `dropout`, then
    /// backpropagation of `loss`; gradients are added into `grad`.
    /// Returns the data loss of the sample.
    fn accumulate_gradient(
        &self,
        sample: &Sample,
        loss: Loss,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut Self,
    ) -> Result<f64>;

    fn tensors(&self) -> Vec<(TensorRole, &[f64])>;

    fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])>;

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    (rate > 0.0).then(|| {
        let keep = 1.0 / (1.0 - rate);
        (0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
    })
}

fn apply_mask(values: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        values.iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
    }
}

/// Stacked recurrent layers whose final hidden state is mapped to the whole
/// horizon by one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub layers: Vec<RecurrentCell>,
    pub readout: Dense,
}

struct EncoderTrace {
    traces: Vec<CellTrace>,
    masks: Vec<Option<Vec<f64>>>,
    last_hidden: Vec<f64>,
    readout_mask: Option<Vec<f64>>,
}

impl Encoder {
    pub fn new<R: Rng>(kind: CellKind, input_dim: usize, hidden: &[usize], horizon: usize, rng: &mut R) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) || input_dim == 0 || horizon == 0 {
            return Err(Error::ShapeMismatch("encoder needs non-zero layer sizes".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            layers.push(RecurrentCell::random(kind, width, h, rng));
            width = h;
        }
        Ok(Self { layers, readout: Dense::random(width, horizon, rng) })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn horizon(&self) -> usize {
        self.readout.outputs
    }

    fn run(&self, input: &[f64], dropout: f64, rng: Option<&mut ChaCha8Rng>) -> Result<(Vec<f64>, EncoderTrace)> {
        let mut rng = rng;
        let mut trace = EncoderTrace {
            traces: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            last_hidden: Vec::new(),
            readout_mask: None,
        };
        let mut seq = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            // dropout on the non-recurrent connection between stacked layers
            let mask = match (k > 0, rng.as_deref_mut()) {
                (true, Some(r)) => dropout_mask(seq.len(), dropout, r),
                _ => None,
            };
            apply_mask(&mut seq, &mask);
            let cell_trace = layer.forward_trace(&seq)?;
            trace.masks.push(mask);
            seq = cell_trace.hidden.clone();
            trace.traces.push(cell_trace);
        }
        let h = self.layers.last().map_or(0, |l| l.hidden_dim);
        let mut last = seq[seq.len() - h..].to_vec();
        trace.readout_mask = rng.and_then(|r| dropout_mask(h, dropout, r));
        apply_mask(&mut last, &trace.readout_mask);
        let out = self.readout.forward(&last);
        trace.last_hidden = last;
        Ok((out, trace))
    }
}

impl Network for Encoder {
    fn predict(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.run(&sample.input, 0.0, None)?.0)
    }

    fn accumulate_gradient(
        &self,
        sample: &Sample,
        loss: Loss,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut Self,
    ) -> Result<f64> {
        let (out, trace) = self.run(&sample.input, dropout, Some(rng))?;
        let value = loss.value(&out, &sample.target)?;
        let d_out = loss.gradient(&out, &sample.target)?;
        let mut d_last = self.readout.backward(&trace.last_hidden, &d_out, &mut grad.readout);
        apply_mask(&mut d_last, &trace.readout_mask);

        let top = self.layers.len() - 1;
        let h = self.layers[top].hidden_dim;
        let len = sample.input.len() / self.input_dim();
        let mut d_hidden = alloc::vec![0.0; len * h];
        d_hidden[(len - 1) * h..].copy_from_slice(&d_last);
        for k in (0..self.layers.len()).rev() {
            let mut d_in = self.layers[k].backward(&trace.traces[k], &d_hidden, &mut grad.layers[k]);
            if k > 0 {
                apply_mask(&mut d_in, &trace.masks[k]);
                d_hidden = d_in;
            }
        }
        Ok(value)
    }

    fn tensors(&self) -> Vec<(TensorRole, &[f64])> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push((TensorRole::RecurrentWeight, l.weights.as_slice()));
            out.push((TensorRole::RecurrentBias, l.bias.as_slice()));
        }
        out.push((TensorRole::ReadoutWeight, self.readout.weights.as_slice()));
        out.push((TensorRole::ReadoutBias, self.readout.bias.as_slice()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push((TensorRole::RecurrentWeight, l.weights.as_mut_slice()));
            out.push((TensorRole::RecurrentBias, l.bias.as_mut_slice()));
        }
        out.push((TensorRole::ReadoutWeight, self.readout.weights.as_mut_slice()));
        out.push((TensorRole::ReadoutBias, self.readout.bias.as_mut_slice()));
        out
    }
}

/// Recurrent pass over the horizon: each step reads the C1 value and the
/// prospective channels, and emits `c1_t + readout(h_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refiner {
    pub cell: RecurrentCell,
    pub readout: Dense,
}

impl Refiner {
    pub fn new<R: Rng>(kind: CellKind, prospective: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::ShapeMismatch("refiner needs hidden units".into()));
        }
        Ok(Self { cell: RecurrentCell::random(kind, 1 + prospective, hidden, rng), readout: Dense::random(hidden, 1, rng) })
    }

    pub fn prospective_dim(&self) -> usize {
        self.cell.input_dim - 1
    }

    fn assemble(&self, forecast: &[f64], context: &[f64]) -> Result<Vec<f64>> {
        let p = self.prospective_dim();
        let h = forecast.len();
        if h == 0 {
            return Err(Error::EmptySeries);
        }
        if context.len() != h * p {
            if p > 0 && context.len() % p == 0 {
                return Err(Error::LengthMismatch { expected: h, actual: context.len() / p });
            }
            return Err(Error::ChannelMismatch(format!(
                "{} prospective values for horizon {h} and {p} channels",
                context.len()
            )));
        }
        let mut seq = Vec::with_capacity(h * (p + 1));
        for t in 0..h {
            seq.push(forecast[t]);
            seq.extend_from_slice(&context[t * p..(t + 1) * p]);
        }
        Ok(seq)
    }

    fn run(&self, sample: &Sample, dropout: f64, rng: Option<&mut ChaCha8Rng>) -> Result<(Vec<f64>, CellTrace, Vec<f64>, Option<Vec<f64>>)> {
        let seq = self.assemble(&sample.input, &sample.context)?;
        let trace = self.cell.forward_trace(&seq)?;
        let mut hidden = trace.hidden.clone();
        let mask = rng.and_then(|r| dropout_mask(hidden.len(), dropout, r));
        apply_mask(&mut hidden, &mask);
        let hd = self.cell.hidden_dim;
        let out = sample
            .input
            .iter()
            .enumerate()
            .map(|(t, c1)| c1 + self.readout.forward(&hidden[t * hd..(t + 1) * hd])[0])
            .collect();
        Ok((out, trace, hidden, mask))
    }
}

impl Network for Refiner {
    fn predict(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.run(sample, 0.0, None)?.0)
    }

    fn accumulate_gradient(
        &self,
        sample: &Sample,
        loss: Loss,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut Self,
    ) -> Result<f64> {
        let (out, trace, hidden, mask) = self.run(sample, dropout, Some(rng))?;
        let value = loss.value(&out, &sample.target)?;
        let d_out = loss.gradient(&out, &sample.target)?;
        let hd = self.cell.hidden_dim;
        let mut d_hidden = alloc::vec![0.0; hidden.len()];
        for (t, d) in d_out.iter().enumerate() {
            let dh = self.readout.backward(&hidden[t * hd..(t + 1) * hd], &[*d], &mut grad.readout);
            d_hidden[t * hd..(t + 1) * hd].copy_from_slice(&dh);
        }
        apply_mask(&mut d_hidden, &mask);
        self.cell.backward(&trace, &d_hidden, &mut grad.cell);
        Ok(value)
    }

    fn tensors(&self) -> Vec<(TensorRole, &[f64])> {
        alloc::vec![
            (TensorRole::RecurrentWeight, self.cell.weights.as_slice()),
            (TensorRole::RecurrentBias, self.cell.bias.as_slice()),
            (TensorRole::ReadoutWeight, self.readout.weights.as_slice()),
            (TensorRole::ReadoutBias, self.readout.bias.as_slice()),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])> {
        alloc::vec![
            (TensorRole::RecurrentWeight, self.cell.weights.as_mut_slice()),
            (TensorRole::RecurrentBias, self.cell.bias.as_mut_slice()),
            (TensorRole::ReadoutWeight, self.readout.weights.as_mut_slice()),
            (TensorRole::ReadoutBias, self.readout.bias.as_mut_slice()),
        ]
    }
}
