use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::models::{LstmClassifier, LstmState};

/// Gradient of a scalar loss with respect to every LSTM parameter, in the
/// flat layout of [`LstmClassifier::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Result of one truncated BPTT pass over a chunk.
#[derive(Debug, Clone)]
pub struct ChunkGradient {
    /// Mean NLL over the chunk's frames.
    pub loss: f64,
    pub gradient: Gradient,
    /// State after the last frame; feed it to the next chunk.
    pub final_state: LstmState,
}

/// `-log softmax(logits)[label]`, computed stably.
#[inline]
pub(crate) fn frame_nll(logits: [f64; 2], label: u8) -> f64 {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    lse - logits[label as usize]
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    Ok(())
}

/// Mean over frames of the negative log-likelihood of the gold class.
pub fn nll_loss(logits: ArrayView2<'_, f64>, labels: &[u8]) -> Result<f64> {
    if logits.ncols() != 2 || logits.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "logits {:?} vs {} labels",
            logits.dim(),
            labels.len()
        )));
    }
    check_labels(labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &y)| frame_nll([r[0], r[1]], y))
        .sum();
    Ok(total / labels.len() as f64)
}

/// Exact gradient of `nll_loss(forward_sequence(features), labels)`.
pub fn backward(model: &LstmClassifier, features: ArrayView2<'_, f64>, labels: &[u8]) -> Result<Gradient> {
    Ok(chunk_backward(model, &model.initial_state(), features, labels)?.gradient)
}

/// BPTT over one chunk starting from `init`. The gradient is that of the
/// chunk's mean loss and does not flow into `init`.
pub fn chunk_backward(
    model: &LstmClassifier,
    init: &LstmState,
    features: ArrayView2<'_, f64>,
    labels: &[u8],
) -> Result<ChunkGradient> {
    let t_len = features.nrows();
    if t_len != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{t_len} feature rows vs {} labels",
            labels.len()
        )));
    }
    if t_len > 0 && features.ncols() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} columns, model expects {}",
            features.ncols(),
            model.input_dim()
        )));
    }
    check_labels(labels)?;
    let n_params = model.param_count();
    if t_len == 0 {
        return Ok(ChunkGradient {
            loss: 0.0,
            gradient: Gradient(vec![0.0; n_params]),
            final_state: init.clone(),
        });
    }

    let (d, h) = (model.input_dim(), model.hidden_dim());
    let (traces, logits) = model.forward_trace(init, features);

    let mut grad = vec![0.0; n_params];
    let (r_ih, r_hh, r_b, r_wo, r_bo) = (
        model.w_ih_range(),
        model.w_hh_range(),
        model.bias_range(),
        model.w_out_range(),
        model.b_out_range(),
    );
    let w_hh = model.w_hh();
    let w_out = model.w_out();
    let scale = 1.0 / t_len as f64;

    let mut loss = 0.0;
    let mut dh = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    let mut x = vec![0.0; d];

    for t in (0..t_len).rev() {
        let tr = &traces[t];
        let y = labels[t] as usize;
        let l = logits[t];
        loss += frame_nll(l, labels[t]);

        let m = l[0].max(l[1]);
        let (e0, e1) = ((l[0] - m).exp(), (l[1] - m).exp());
        let mut dl = [e0 / (e0 + e1), e1 / (e0 + e1)];
        dl[y] -= 1.0;
        dl[0] *= scale;
        dl[1] *= scale;

        {
            let (g_wo, g_bo) = grad[r_wo.start..r_bo.end].split_at_mut(2 * h);
            for k in 0..2 {
                for j in 0..h {
                    g_wo[k * h + j] += dl[k] * tr.hidden[j];
                }
                g_bo[k] += dl[k];
            }
        }
        for j in 0..h {
            dh[j] = dl[0] * w_out[j] + dl[1] * w_out[h + j] + dh_next[j];
        }

        let (h_prev, c_prev) = if t > 0 {
            (&traces[t - 1].hidden[..], &traces[t - 1].cell[..])
        } else {
            (&init.hidden[..], &init.cell[..])
        };
        for j in 0..h {
            let (i, f, g, o) = (tr.gates[j], tr.gates[h + j], tr.gates[2 * h + j], tr.gates[3 * h + j]);
            let tc = tr.cell_tanh[j];
            let d_o = dh[j] * tc;
            let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * g * i * (1.0 - i);
            da[h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - g * g);
            da[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }

        for (dst, src) in x.iter_mut().zip(features.row(t).iter()) {
            *dst = *src;
        }
        let g_ih = &mut grad[r_ih.clone()];
        for r in 0..4 * h {
            let a = da[r];
            if a != 0.0 {
                for (g, xv) in g_ih[r * d..(r + 1) * d].iter_mut().zip(&x) {
                    *g += a * xv;
                }
            }
        }
        let g_hh = &mut grad[r_hh.clone()];
        for r in 0..4 * h {
            let a = da[r];
            if a != 0.0 {
                for (g, hv) in g_hh[r * h..(r + 1) * h].iter_mut().zip(h_prev) {
                    *g += a * hv;
                }
            }
        }
        for (g, a) in grad[r_b.clone()].iter_mut().zip(&da) {
            *g += a;
        }
        dh_next.fill(0.0);
        for r in 0..4 * h {
            let a = da[r];
            if a != 0.0 {
                for (dn, w) in dh_next.iter_mut().zip(&w_hh[r * h..(r + 1) * h]) {
                    *dn += a * w;
                }
            }
        }
    }

    let last = traces.last().expect("non-empty chunk");
    Ok(ChunkGradient {
        loss: loss * scale,
        gradient: Gradient(grad),
        final_state: LstmState {
            hidden: last.hidden.clone(),
            cell: last.cell.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Mean NLL recomputed with plain scalar math.
    fn naive_nll(logits: &Array2<f64>, labels: &[u8]) -> f64 {
        let mut s = 0.0;
        for (t, &y) in labels.iter().enumerate() {
            let (a, b) = (logits[[t, 0]], logits[[t, 1]]);
            let p = if y == 1 { b.exp() / (a.exp() + b.exp()) } else { a.exp() / (a.exp() + b.exp()) };
            s -= p.ln();
        }
        s / labels.len() as f64
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Array2::zeros((7, 2));
        let loss = nll_loss(logits.view(), &[0, 1, 1, 0, 1, 0, 0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logits_give_tiny_loss() {
        let labels = [0u8, 1, 1, 0];
        let logits = Array2::from_shape_fn((4, 2), |(t, k)| if k as u8 == labels[t] { 20.0 } else { 0.0 });
        assert!(nll_loss(logits.view(), &labels).unwrap() < 1e-8);
    }

    #[test]
    fn nll_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logits = Array2::from_shape_fn((30, 2), |_| rng.random_range(-4.0..4.0));
        let labels: Vec<u8> = (0..30).map(|_| rng.random_range(0..2)).collect();
        let got = nll_loss(logits.view(), &labels).unwrap();
        assert!((got - naive_nll(&logits, &labels)).abs() < 1e-12);
    }

    #[test]
    fn nll_shape_errors() {
        let logits = Array2::zeros((3, 2));
        assert!(matches!(nll_loss(logits.view(), &[0, 1]), Err(Error::ShapeMismatch(_))));
        let wide = Array2::zeros((2, 3));
        assert!(nll_loss(wide.view(), &[0, 1]).is_err());
    }

    #[test]
    fn empty_sequence_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = LstmClassifier::random(5, 7, &mut rng);
        let g = backward(&m, Array2::zeros((0, 5)).view(), &[]).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert_eq!(g.values().len(), m.param_count());
    }

    #[test]
    fn chunk_loss_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = LstmClassifier::random(5, 7, &mut rng);
        let x = Array2::from_shape_fn((11, 5), |_| rng.random_range(0.0..3.0));
        let y: Vec<u8> = (0..11).map(|_| rng.random_range(0..2)).collect();
        let cg = chunk_backward(&m, &m.initial_state(), x.view(), &y).unwrap();
        let logits = m.forward_sequence(x.view()).unwrap();
        assert!((cg.loss - nll_loss(logits.view(), &y).unwrap()).abs() < 1e-12);
    }
}
