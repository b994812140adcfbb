use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// Hidden size of the published architecture.
pub const DEFAULT_HIDDEN: usize = 64;

/// Number of gates packed in the 4H blocks, in order input, forget,
/// candidate, output.
const GATES: usize = 4;

/// One-layer uni-directional LSTM followed by a biased 2-way projection.
///
/// All parameters live in one flat vector, laid out as
/// `w_ih (4H x D) | w_hh (4H x H) | bias (4H) | w_out (2 x H) | b_out (2)`,
/// matrices row-major and gate blocks ordered input, forget, candidate,
/// output. The same layout is used for gradients and in model files.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}

/// Recurrent state carried between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }

    pub fn reset(&mut self) {
        self.hidden.fill(0.0);
        self.cell.fill(0.0);
    }
}

/// Parameter count of an LSTM classifier: `4H(D + H + 1) + 2H + 2`.
pub const fn lstm_param_count(input_dim: usize, hidden_dim: usize) -> usize {
    GATES * hidden_dim * (input_dim + hidden_dim + 1) + 2 * hidden_dim + 2
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Activations of one cell step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct CellTrace {
    /// Activated gates, 4H, ordered input, forget, candidate, output.
    pub gates: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmClassifier {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmClassifier {
            input_dim,
            hidden_dim,
            params: vec![0.0; lstm_param_count(input_dim, hidden_dim)],
        }
    }

    /// Uniform `±1/sqrt(H)` initialization with the forget-gate bias at 1.
    ///
    /// Values are drawn as `f32` so a freshly initialized model survives a
    /// save/load round trip unchanged.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut model = Self::zeros(input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim as f32).sqrt();
        for p in &mut model.params {
            *p = rng.random_range(-bound..bound) as f64;
        }
        let h = hidden_dim;
        let bias = model.bias_range();
        model.params[bias.start + h..bias.start + 2 * h].fill(1.0);
        model
    }

    pub fn from_params(input_dim: usize, hidden_dim: usize, params: Vec<f64>) -> Result<Self> {
        let expected = lstm_param_count(input_dim, hidden_dim);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: params.len(),
            });
        }
        Ok(LstmClassifier {
            input_dim,
            hidden_dim,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn w_ih_range(&self) -> std::ops::Range<usize> {
        0..GATES * self.hidden_dim * self.input_dim
    }

    pub(crate) fn w_hh_range(&self) -> std::ops::Range<usize> {
        let start = self.w_ih_range().end;
        start..start + GATES * self.hidden_dim * self.hidden_dim
    }

    pub(crate) fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.w_hh_range().end;
        start..start + GATES * self.hidden_dim
    }

    pub(crate) fn w_out_range(&self) -> std::ops::Range<usize> {
        let start = self.bias_range().end;
        start..start + 2 * self.hidden_dim
    }

    pub(crate) fn b_out_range(&self) -> std::ops::Range<usize> {
        let start = self.w_out_range().end;
        start..start + 2
    }

    /// Input weights, 4H x D row-major.
    pub fn w_ih(&self) -> &[f64] {
        &self.params[self.w_ih_range()]
    }

    /// Recurrent weights, 4H x H row-major.
    pub fn w_hh(&self) -> &[f64] {
        &self.params[self.w_hh_range()]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.bias_range()]
    }

    /// Projection weights, 2 x H row-major.
    pub fn w_out(&self) -> &[f64] {
        &self.params[self.w_out_range()]
    }

    pub fn b_out(&self) -> &[f64] {
        &self.params[self.b_out_range()]
    }

    /// Rounds every parameter to the nearest `f32`, the model file precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.hidden_dim)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_state(&self, state: &LstmState) -> Result<()> {
        if state.hidden.len() != self.hidden_dim || state.cell.len() != self.hidden_dim {
            return Err(Error::DimensionMismatch {
                expected: self.hidden_dim,
                found: state.hidden.len().min(state.cell.len()),
            });
        }
        Ok(())
    }

    /// Cell math shared by inference and training. Writes the activated
    /// gates into `gates` and the new cell/hidden vectors into `cell`/`hidden`.
    #[inline]
    pub(crate) fn cell_forward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &mut [f64],
        cell: &mut [f64],
        cell_tanh: &mut [f64],
        hidden: &mut [f64],
    ) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let w_ih = self.w_ih();
        let w_hh = self.w_hh();
        let bias = self.bias();
        for r in 0..GATES * h {
            let pre = bias[r] + dot(&w_ih[r * d..(r + 1) * d], x) + dot(&w_hh[r * h..(r + 1) * h], h_prev);
            gates[r] = if r / h == 2 { pre.tanh() } else { sigmoid(pre) };
        }
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            cell[j] = c;
            cell_tanh[j] = c.tanh();
            hidden[j] = o * cell_tanh[j];
        }
    }

    #[inline]
    pub(crate) fn project(&self, hidden: &[f64]) -> [f64; 2] {
        let h = self.hidden_dim;
        let w = self.w_out();
        let b = self.b_out();
        [b[0] + dot(&w[..h], hidden), b[1] + dot(&w[h..], hidden)]
    }

    /// Advances the state by one frame and returns the 2-way logits.
    pub fn step_in_place(&self, state: &mut LstmState, x: &[f64]) -> Result<[f64; 2]> {
        self.check_input(x)?;
        self.check_state(state)?;
        let h = self.hidden_dim;
        let mut gates = vec![0.0; GATES * h];
        let mut cell_tanh = vec![0.0; h];
        let c_prev = std::mem::replace(&mut state.cell, vec![0.0; h]);
        let h_prev = std::mem::replace(&mut state.hidden, vec![0.0; h]);
        self.cell_forward(
            x,
            &h_prev,
            &c_prev,
            &mut gates,
            &mut state.cell,
            &mut cell_tanh,
            &mut state.hidden,
        );
        Ok(self.project(&state.hidden))
    }

    /// Pure single step: returns the next state and the logits.
    pub fn step(&self, state: &LstmState, x: &[f64]) -> Result<(LstmState, [f64; 2])> {
        let mut next = state.clone();
        let logits = self.step_in_place(&mut next, x)?;
        Ok((next, logits))
    }

    /// Runs the whole sequence from the zero state; T x 2 logits.
    pub fn forward_sequence(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut state = self.initial_state();
        self.forward_from(&mut state, features)
    }

    /// Runs `features` starting from (and updating) `state`.
    pub fn forward_from(&self, state: &mut LstmState, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim && features.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: features.ncols(),
            });
        }
        let mut out = Array2::zeros((features.nrows(), 2));
        for (t, row) in features.rows().into_iter().enumerate() {
            let x = row.to_vec();
            let logits = self.step_in_place(state, &x)?;
            out[[t, 0]] = logits[0];
            out[[t, 1]] = logits[1];
        }
        Ok(out)
    }

    /// Forward pass that records every activation, for BPTT.
    pub(crate) fn forward_trace(
        &self,
        init: &LstmState,
        features: ArrayView2<'_, f64>,
    ) -> (Vec<CellTrace>, Vec<[f64; 2]>) {
        let h = self.hidden_dim;
        let mut traces: Vec<CellTrace> = Vec::with_capacity(features.nrows());
        let mut logits = Vec::with_capacity(features.nrows());
        let mut x = vec![0.0; self.input_dim];
        for row in features.rows() {
            for (dst, src) in x.iter_mut().zip(row.iter()) {
                *dst = *src;
            }
            let mut tr = CellTrace {
                gates: vec![0.0; GATES * h],
                cell: vec![0.0; h],
                cell_tanh: vec![0.0; h],
                hidden: vec![0.0; h],
            };
            let (h_prev, c_prev) = match traces.last() {
                Some(p) => (&p.hidden[..], &p.cell[..]),
                None => (&init.hidden[..], &init.cell[..]),
            };
            self.cell_forward(
                &x,
                h_prev,
                c_prev,
                &mut tr.gates,
                &mut tr.cell,
                &mut tr.cell_tanh,
                &mut tr.hidden,
            );
            logits.push(self.project(&tr.hidden));
            traces.push(tr);
        }
        (traces, logits)
    }
}
