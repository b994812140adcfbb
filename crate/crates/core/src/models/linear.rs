use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Context lengths of the published linear baselines.
pub const LINEAR_WINDOWS: [usize; 3] = [1, 25, 50];

/// Fixed-context linear classifier without bias.
///
/// Weights are stored W x D row-major, row 0 applying to the oldest frame of
/// the window and row W-1 to the current frame. A frame is classified as
/// signing when the logit is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    window: usize,
    input_dim: usize,
    weights: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(window: usize, input_dim: usize) -> Self {
        LinearClassifier {
            window,
            input_dim,
            weights: vec![0.0; window * input_dim],
        }
    }

    pub fn from_weights(window: usize, input_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("linear window must be >= 1".into()));
        }
        if weights.len() != window * input_dim {
            return Err(Error::LengthMismatch {
                expected: window * input_dim,
                found: weights.len(),
            });
        }
        Ok(LinearClassifier {
            window,
            input_dim,
            weights,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn round_to_f32(&mut self) {
        for w in &mut self.weights {
            *w = *w as f32 as f64;
        }
    }

    /// Logit of a W x D window holding the most recent frames, oldest first.
    pub fn logit(&self, window: ArrayView2<'_, f64>) -> Result<f64> {
        if window.dim() != (self.window, self.input_dim) {
            return Err(Error::ShapeMismatch(format!(
                "window is {:?}, expected ({}, {})",
                window.dim(),
                self.window,
                self.input_dim
            )));
        }
        Ok(window
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum())
    }

    /// Per-frame logits over a T x D sequence; frames before the start of the
    /// sequence count as zero rows.
    pub fn logits_sequence(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let t_len = features.nrows();
        if t_len > 0 && features.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: features.ncols(),
            });
        }
        let d = self.input_dim;
        let w = self.window;
        let mut out = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut s = 0.0;
            for k in 0..w {
                // row k of the window is frame t - (w - 1) + k
                let Some(src) = (t + k + 1).checked_sub(w) else {
                    continue;
                };
                let row = features.row(src);
                s += row
                    .iter()
                    .zip(&self.weights[k * d..(k + 1) * d])
                    .map(|(x, w)| x * w)
                    .sum::<f64>();
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Per-landmark coefficient magnitude: `|w|` for W=1, the L1 norm over
    /// the window otherwise.
    pub fn landmark_importance(&self) -> Vec<f64> {
        (0..self.input_dim)
            .map(|p| (0..self.window).map(|k| self.weights[k * self.input_dim + p].abs()).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_logit() {
        let m = LinearClassifier::zeros(25, 25);
        let x = Array2::from_elem((25, 25), 3.0);
        assert_eq!(m.logit(x.view()).unwrap(), 0.0);
    }

    #[test]
    fn one_hot_weight_reads_one_point() {
        let mut w = vec![0.0; 25];
        w[3] = 1.0;
        let m = LinearClassifier::from_weights(1, 25, w).unwrap();
        let mut x = Array2::zeros((1, 25));
        x[[0, 3]] = 4.5;
        x[[0, 7]] = 9.0;
        assert_eq!(m.logit(x.view()).unwrap(), 4.5);
    }

    #[test]
    fn logit_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &w in &LINEAR_WINDOWS {
            let weights: Vec<f64> = (0..w * 25).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = LinearClassifier::from_weights(w, 25, weights.clone()).unwrap();
            let x = Array2::from_shape_fn((w, 25), |_| rng.random_range(0.0..5.0));
            let mut want = 0.0;
            for k in 0..w {
                for p in 0..25 {
                    want += weights[k * 25 + p] * x[[k, p]];
                }
            }
            assert!((m.logit(x.view()).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_logits_pad_with_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weights: Vec<f64> = (0..3 * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = LinearClassifier::from_weights(3, 2, weights).unwrap();
        let feats = Array2::from_shape_fn((6, 2), |_| rng.random_range(0.0..5.0));
        let logits = m.logits_sequence(feats.view()).unwrap();
        for t in 0..6 {
            let mut win = Array2::zeros((3, 2));
            for k in 0..3 {
                let src = t as isize - 2 + k as isize;
                if src >= 0 {
                    win.row_mut(k).assign(&feats.row(src as usize));
                }
            }
            assert!((logits[t] - m.logit(win.view()).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn param_counts() {
        for (w, n) in [(1, 25), (25, 625), (50, 1250)] {
            assert_eq!(LinearClassifier::zeros(w, 25).param_count(), n);
        }
    }
}
