//! Classifiers: the fixed-context linear baselines and the LSTM tagger.

mod file;
mod linear;
mod lstm;

use ndarray::{Array2, ArrayView2};

pub use file::{MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use linear::{LinearClassifier, LINEAR_WINDOWS};
pub use lstm::{lstm_param_count, LstmClassifier, LstmState, DEFAULT_HIDDEN};

pub(crate) use lstm::{dot, sigmoid};

use crate::error::Result;
use crate::pose_features::{NormalizationMode, PointSubset};

/// Per-frame decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// 1 = signing, 0 = not signing.
    pub label: u8,
    /// Softmax probability of the signing class.
    pub probability: f64,
}

/// Arg-max label (ties go to not-signing) and signing probability.
pub fn predict(logits: [f64; 2]) -> Prediction {
    let label = u8::from(logits[1] > logits[0]);
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    Prediction {
        label,
        probability: e1 / (e0 + e1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Lstm(LstmClassifier),
    Linear(LinearClassifier),
}

impl Classifier {
    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Lstm(m) => m.input_dim(),
            Classifier::Linear(m) => m.input_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Classifier::Lstm(m) => m.param_count(),
            Classifier::Linear(m) => m.param_count(),
        }
    }

    pub fn kind_name(&self) -> String {
        match self {
            Classifier::Lstm(m) => format!("lstm-{}", m.hidden_dim()),
            Classifier::Linear(m) => format!("linear-{}", m.window()),
        }
    }

    /// T x 2 logits. The linear model's single logit is placed in the
    /// signing column so that [`predict`] applies unchanged.
    pub fn logits(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Classifier::Lstm(m) => m.forward_sequence(features),
            Classifier::Linear(m) => {
                let l = m.logits_sequence(features)?;
                let mut out = Array2::zeros((l.len(), 2));
                for (t, v) in l.into_iter().enumerate() {
                    out[[t, 1]] = v;
                }
                Ok(out)
            }
        }
    }

    /// Per-frame labels for a whole sequence.
    pub fn predict_labels(&self, features: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        let logits = self.logits(features)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| predict([r[0], r[1]]).label)
            .collect())
    }
}

/// A classifier together with the preprocessing it was trained for; this is
/// what a model file stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub classifier: Classifier,
    pub subset: PointSubset,
    pub normalization: NormalizationMode,
}

impl Detector {
    pub fn new(classifier: Classifier, subset: PointSubset, normalization: NormalizationMode) -> Self {
        Detector {
            classifier,
            subset,
            normalization,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn predict_tie_goes_to_not_signing() {
        let p = predict([0.0, 0.0]);
        assert_eq!(p.label, 0);
        assert_eq!(p.probability, 0.5);
    }

    #[test]
    fn predict_argmax() {
        assert_eq!(predict([-1.0, 3.0]).label, 1);
        assert_eq!(predict([2.0, 1.0]).label, 0);
        let p = predict([-1000.0, 1000.0]);
        assert_eq!(p.probability, 1.0);
    }

    proptest! {
        #[test]
        fn probability_is_monotone_in_margin(a in -50.0f64..50.0, b in -50.0f64..50.0, delta in 0.01f64..10.0) {
            let p1 = predict([a, b]).probability;
            let p2 = predict([a, b + delta]).probability;
            prop_assert!(p2 >= p1);
            let q = predict([a, b]);
            let q0 = 1.0 - q.probability;
            prop_assert!(((q0 + q.probability) - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&q.probability));
        }
    }
}
