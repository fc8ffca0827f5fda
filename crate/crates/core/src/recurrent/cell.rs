//! LSTM and GRU cells with cached forward passes and backpropagation
//! through time.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            Self::Lstm => 4,
            Self::Gru => 3,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `out[r] = bias[r] + Σ_k w[r, k] · x[k]` for rows `rows` of a row-major matrix.
pub(crate) fn affine(w: &[f64], bias: &[f64], x: &[f64], rows: core::ops::Range<usize>, out: &mut [f64]) {
    let cols = x.len();
    for (o, r) in out.iter_mut().zip(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o = bias[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates `grad_w[r, :] += d[r] · x` and `d_x += w[r, :] · d[r]`.
pub(crate) fn affine_backward(
    w: &[f64],
    x: &[f64],
    d: &[f64],
    rows: core::ops::Range<usize>,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    d_x: &mut [f64],
) {
    let cols = x.len();
    for (dr, r) in d.iter().zip(rows) {
        if *dr == 0.0 {
            continue;
        }
        grad_b[r] += dr;
        let row = &w[r * cols..(r + 1) * cols];
        let grow = &mut grad_w[r * cols..(r + 1) * cols];
        for k in 0..cols {
            grow[k] += dr * x[k];
            d_x[k] += dr * row[k];
        }
    }
}

/// A single recurrent layer. Gate blocks are stacked row-wise in the weight
/// matrix (LSTM: forget, input, candidate, output; GRU: update, reset,
/// candidate), each block `hidden_dim` rows by `input_dim + hidden_dim`
/// columns, columns ordered `[x_t | h_{t-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentCell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Activations cached by [`RecurrentCell::forward_trace`].
#[derive(Debug, Clone)]
pub struct CellTrace {
    len: usize,
    /// `[x_t | h_{t-1}]` per step.
    concat: Vec<f64>,
    /// Post-activation gate values per step.
    gates: Vec<f64>,
    /// LSTM: cell state; GRU: `r ⊙ h_{t-1}`.
    state: Vec<f64>,
    /// LSTM only: `tanh(c_t)`.
    tanh_state: Vec<f64>,
    /// Hidden output per step.
    pub hidden: Vec<f64>,
}

impl RecurrentCell {
    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        let rows = kind.gates() * hidden_dim;
        Self {
            kind,
            input_dim,
            hidden_dim,
            weights: alloc::vec![0.0; rows * (input_dim + hidden_dim)],
            bias: alloc::vec![0.0; rows],
        }
    }

    /// Uniform initialisation in `±1/√H`.
    pub fn random<R: Rng>(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(kind, input_dim, hidden_dim);
        let bound = 1.0 / libm::sqrt(hidden_dim as f64);
        for w in cell.weights.iter_mut().chain(cell.bias.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
        cell
    }

    fn check(&self, inputs: &[f64]) -> Result<usize> {
        let m = self.input_dim;
        let rows = self.kind.gates() * self.hidden_dim;
        if self.weights.len() != rows * (m + self.hidden_dim) || self.bias.len() != rows {
            return Err(Error::ShapeMismatch("cell weights do not match its dimensions".into()));
        }
        if m == 0 || inputs.len() % m != 0 || inputs.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} input values do not form rows of width {m}",
                inputs.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(inputs.len() / m)
    }

    /// Hidden sequence (`L × H`) for an `L × m` input, starting from zero state.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(inputs)?.hidden)
    }

    pub fn forward_trace(&self, inputs: &[f64]) -> Result<CellTrace> {
        let len = self.check(inputs)?;
        let (m, h) = (self.input_dim, self.hidden_dim);
        let g = self.kind.gates();
        let mut trace = CellTrace {
            len,
            concat: alloc::vec![0.0; len * (m + h)],
            gates: alloc::vec![0.0; len * g * h],
            state: alloc::vec![0.0; len * h],
            tanh_state: match self.kind {
                CellKind::Lstm => alloc::vec![0.0; len * h],
                CellKind::Gru => Vec::new(),
            },
            hidden: alloc::vec![0.0; len * h],
        };
        let mut pre = alloc::vec![0.0; g * h];
        let mut n_in = alloc::vec![0.0; m + h];
        for t in 0..len {
            let (prev_h, prev_c) = if t == 0 {
                (None, None)
            } else {
                (Some((t - 1) * h..t * h), Some((t - 1) * h..t * h))
            };
            let concat = &mut trace.concat[t * (m + h)..(t + 1) * (m + h)];
            concat[..m].copy_from_slice(&inputs[t * m..(t + 1) * m]);
            if let Some(r) = prev_h.clone() {
                concat[m..].copy_from_slice(&trace.hidden[r]);
            }
            match self.kind {
                CellKind::Lstm => {
                    affine(&self.weights, &self.bias, concat, 0..4 * h, &mut pre);
                    let gates = &mut trace.gates[t * 4 * h..(t + 1) * 4 * h];
                    for j in 0..h {
                        let f = sigmoid(pre[j]);
                        let i = sigmoid(pre[h + j]);
                        let cand = libm::tanh(pre[2 * h + j]);
                        let o = sigmoid(pre[3 * h + j]);
                        gates[j] = f;
                        gates[h + j] = i;
                        gates[2 * h + j] = cand;
                        gates[3 * h + j] = o;
                        let c_prev = prev_c.as_ref().map_or(0.0, |r| trace.state[r.start + j]);
                        let c = f * c_prev + i * cand;
                        let tc = libm::tanh(c);
                        trace.state[t * h + j] = c;
                        trace.tanh_state[t * h + j] = tc;
                        trace.hidden[t * h + j] = o * tc;
                    }
                }
                CellKind::Gru => {
                    affine(&self.weights, &self.bias, concat, 0..2 * h, &mut pre[..2 * h]);
                    n_in[..m].copy_from_slice(&concat[..m]);
                    for j in 0..h {
                        let r = sigmoid(pre[h + j]);
                        let hp = concat[m + j];
                        n_in[m + j] = r * hp;
                        trace.state[t * h + j] = r * hp;
                    }
                    affine(&self.weights, &self.bias, &n_in, 2 * h..3 * h, &mut pre[2 * h..]);
                    let gates = &mut trace.gates[t * 3 * h..(t + 1) * 3 * h];
                    for j in 0..h {
                        let z = sigmoid(pre[j]);
                        let r = sigmoid(pre[h + j]);
                        let n = libm::tanh(pre[2 * h + j]);
                        gates[j] = z;
                        gates[h + j] = r;
                        gates[2 * h + j] = n;
                        let hp = concat[m + j];
                        trace.hidden[t * h + j] = z * hp + (1.0 - z) * n;
                    }
                }
            }
        }
        Ok(trace)
    }

    /// Backpropagates `d_hidden` (`L × H`, loss gradient w.r.t. every hidden
    /// output) through the unrolled sequence, accumulating parameter gradients
    /// into `grad` and returning the gradient w.r.t. the inputs (`L × m`).
    pub fn backward(&self, trace: &CellTrace, d_hidden: &[f64], grad: &mut RecurrentCell) -> Vec<f64> {
        let (m, h) = (self.input_dim, self.hidden_dim);
        let len = trace.len;
        let g = self.kind.gates();
        let mut d_inputs = alloc::vec![0.0; len * m];
        let mut dh_next = alloc::vec![0.0; h];
        let mut dc_next = alloc::vec![0.0; h];
        let mut d_pre = alloc::vec![0.0; g * h];
        let mut d_concat = alloc::vec![0.0; m + h];
        let mut n_in = alloc::vec![0.0; m + h];
        let mut d_n_in = alloc::vec![0.0; m + h];
        for t in (0..len).rev() {
            let concat = &trace.concat[t * (m + h)..(t + 1) * (m + h)];
            let gates = &trace.gates[t * g * h..(t + 1) * g * h];
            d_concat.fill(0.0);
            match self.kind {
                CellKind::Lstm => {
                    for j in 0..h {
                        let (f, i, cand, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                        let tc = trace.tanh_state[t * h + j];
                        let c_prev = if t == 0 { 0.0 } else { trace.state[(t - 1) * h + j] };
                        let dh = d_hidden[t * h + j] + dh_next[j];
                        let d_o = dh * tc;
                        let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                        d_pre[j] = dc * c_prev * f * (1.0 - f);
                        d_pre[h + j] = dc * cand * i * (1.0 - i);
                        d_pre[2 * h + j] = dc * i * (1.0 - cand * cand);
                        d_pre[3 * h + j] = d_o * o * (1.0 - o);
                        dc_next[j] = dc * f;
                    }
                    affine_backward(&self.weights, concat, &d_pre, 0..4 * h, &mut grad.weights, &mut grad.bias, &mut d_concat);
                    dh_next.copy_from_slice(&d_concat[m..]);
                }
                CellKind::Gru => {
                    let mut dh_prev = alloc::vec![0.0; h];
                    for j in 0..h {
                        let (z, n) = (gates[j], gates[2 * h + j]);
                        let hp = concat[m + j];
                        let dh = d_hidden[t * h + j] + dh_next[j];
                        d_pre[j] = dh * (hp - n) * z * (1.0 - z);
                        d_pre[2 * h + j] = dh * (1.0 - z) * (1.0 - n * n);
                        dh_prev[j] = dh * z;
                    }
                    n_in[..m].copy_from_slice(&concat[..m]);
                    n_in[m..].copy_from_slice(&trace.state[t * h..(t + 1) * h]);
                    d_n_in.fill(0.0);
                    affine_backward(
                        &self.weights,
                        &n_in,
                        &d_pre[2 * h..],
                        2 * h..3 * h,
                        &mut grad.weights,
                        &mut grad.bias,
                        &mut d_n_in,
                    );
                    for j in 0..h {
                        let r = gates[h + j];
                        let hp = concat[m + j];
                        let d_rh = d_n_in[m + j];
                        d_pre[h + j] = d_rh * hp * r * (1.0 - r);
                        dh_prev[j] += d_rh * r;
                    }
                    affine_backward(&self.weights, concat, &d_pre[..2 * h], 0..2 * h, &mut grad.weights, &mut grad.bias, &mut d_concat);
                    for k in 0..m {
                        d_concat[k] += d_n_in[k];
                    }
                    for j in 0..h {
                        dh_next[j] = dh_prev[j] + d_concat[m + j];
                    }
                }
            }
            d_inputs[t * m..(t + 1) * m].copy_from_slice(&d_concat[..m]);
        }
        d_inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_hidden() {
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let cell = RecurrentCell::zeros(kind, 2, 3);
            let out = cell.forward(&[0.4, -1.0, 2.0, 0.5, 3.0, 1.0]).unwrap();
            assert_eq!(out.len(), 9);
            assert!(out.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn lstm_single_unit_matches_hand_evaluation() {
        let mut cell = RecurrentCell::zeros(CellKind::Lstm, 1, 1);
        // rows f, i, g, o; columns [x | h]
        cell.weights = vec![0.5, 0.0, -0.3, 0.0, 0.8, 0.0, 0.2, 0.0];
        cell.bias = vec![0.1, 0.2, -0.1, 0.3];
        let x: f64 = 1.5;
        let i = 1.0 / (1.0 + (-(-0.3 * x + 0.2f64)).exp());
        let g = (0.8 * x - 0.1f64).tanh();
        let o = 1.0 / (1.0 + (-(0.2 * x + 0.3f64)).exp());
        let c = i * g; // c_0 = 0, so the forget gate drops out
        let expected = o * c.tanh();
        let out = cell.forward(&[x]).unwrap();
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn gru_single_unit_matches_hand_evaluation() {
        let mut cell = RecurrentCell::zeros(CellKind::Gru, 1, 1);
        // rows z, r, n; columns [x | h]
        cell.weights = vec![0.4, 0.7, -0.6, 0.2, 0.9, -0.5];
        cell.bias = vec![0.05, 0.1, -0.2];
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let x1: f64 = 0.8;
        // step 1 from h = 0
        let z1 = sig(0.4 * x1 + 0.05);
        let n1 = (0.9 * x1 - 0.2f64).tanh();
        let h1 = (1.0 - z1) * n1;
        // step 2
        let x2: f64 = -0.3;
        let z2 = sig(0.4 * x2 + 0.7 * h1 + 0.05);
        let r2 = sig(-0.6 * x2 + 0.2 * h1 + 0.1);
        let n2 = (0.9 * x2 - 0.5 * (r2 * h1) - 0.2).tanh();
        let h2 = z2 * h1 + (1.0 - z2) * n2;
        let out = cell.forward(&[x1, x2]).unwrap();
        assert!((out[0] - h1).abs() < 1e-15);
        assert!((out[1] - h2).abs() < 1e-15);
    }

    #[test]
    fn hidden_values_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let mut cell = RecurrentCell::random(kind, 3, 6, &mut rng);
            cell.weights.iter_mut().for_each(|w| *w *= 8.0);
            let input: Vec<f64> = (0..60).map(|i| libm::sin(i as f64) * 5.0).collect();
            let out = cell.forward(&input).unwrap();
            assert_eq!(out.len(), 20 * 6);
            assert!(out.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cell = RecurrentCell::zeros(CellKind::Lstm, 2, 3);
        assert!(matches!(cell.forward(&[1.0, 2.0, 3.0]), Err(Error::ShapeMismatch(_))));
        assert_eq!(cell.forward(&[1.0, f64::NAN]), Err(Error::NonFiniteInput));
    }
}
